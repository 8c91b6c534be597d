"""
SDPA sparse format (.dat-s) 读写。

问题形式：minimize c^T x s.t. sum_k x_k F_k - F_0 >= 0，F_k 分块对角；
块大小为负表示对角（LP）块。只写上三角，按 (k, block, i, j) 排序，浮点数
保留 17 位有效数字，因此 write(read(write(x))) 与原文件逐字节一致。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from src.core.errors import InputError, IoFailure

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _fmt(value: float) -> str:
    text = "%.17g" % value
    return "0" if text == "-0" else text


@dataclass(eq=False)
class SdpaProblem:
    c: np.ndarray
    block_struct: List[int]
    # matrices[k][b]：F_k 的第 b 块，稠密存储（对角块也一样）
    matrices: List[List[np.ndarray]]
    comments: List[str] = field(default_factory=list)

    @classmethod
    def empty(cls, n_vars: int, block_struct: Sequence[int], comments: Sequence[str] = ()) -> "SdpaProblem":
        blocks = list(block_struct)
        mats = [[np.zeros((abs(s), abs(s))) for s in blocks] for _ in range(n_vars + 1)]
        return cls(np.zeros(n_vars), blocks, mats, list(comments))

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def set_entry(self, k: int, block: int, i: int, j: int, value: float) -> None:
        """k（0 即 F_0）、block、i、j 均从 0 开始；对称位置同时写入。"""
        if self.block_struct[block] < 0 and i != j:
            raise InputError(f"off-diagonal entry in diagonal block {block}")
        M = self.matrices[k][block]
        M[i, j] = value
        M[j, i] = value

    def block_of(self, x: np.ndarray, block: int) -> np.ndarray:
        """sum_k x_k F_k - F_0 for one block."""
        out = -self.matrices[0][block].copy()
        for k, xk in enumerate(np.asarray(x, dtype=float), start=1):
            out += xk * self.matrices[k][block]
        return out

    def structure_equals(self, other: "SdpaProblem") -> bool:
        if self.block_struct != other.block_struct or self.n_vars != other.n_vars:
            return False
        if not np.array_equal(self.c, other.c):
            return False
        return all(
            np.array_equal(a, b)
            for mats_a, mats_b in zip(self.matrices, other.matrices)
            for a, b in zip(mats_a, mats_b)
        )


def dumps_sdpa(problem: SdpaProblem) -> str:
    lines = [f"* {text}" for text in problem.comments]
    lines.append(str(problem.n_vars))
    lines.append(str(len(problem.block_struct)))
    lines.append(" ".join(str(s) for s in problem.block_struct))
    lines.append(" ".join(_fmt(v) for v in problem.c))
    for k, mats in enumerate(problem.matrices):
        for b, M in enumerate(mats):
            rows, cols = np.nonzero(np.triu(M))
            for i, j in zip(rows, cols):
                lines.append(f"{k} {b + 1} {i + 1} {j + 1} {_fmt(M[i, j])}")
    return "\n".join(lines) + "\n"


def write_sdpa(problem: SdpaProblem, path: PathLike) -> Path:
    path = Path(path)
    text = dumps_sdpa(problem)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    logger.info(f"[SDPA] wrote {path} ({problem.n_vars} variables, {len(problem.block_struct)} blocks)")
    return path


def _numbers(line: str) -> List[str]:
    for ch in "{}(),":
        line = line.replace(ch, " ")
    return line.split()


def loads_sdpa(text: str) -> SdpaProblem:
    comments: List[str] = []
    body: List[str] = []
    for raw in text.splitlines():
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped[0] in '*"':
            if not body:
                comments.append(stripped[1:].strip())
            continue
        body.append(stripped)
    if len(body) < 4:
        raise InputError("SDPA text is missing header lines")
    try:
        n_vars = int(_numbers(body[0])[0])
        n_blocks = int(_numbers(body[1])[0])
        blocks = [int(v) for v in _numbers(body[2])[:n_blocks]]
        c = np.array([float(v) for v in _numbers(body[3])[:n_vars]])
    except (IndexError, ValueError) as e:
        raise InputError(f"malformed SDPA header: {e}") from e
    if len(blocks) != n_blocks or len(c) != n_vars:
        raise InputError("SDPA header counts do not match")

    problem = SdpaProblem.empty(n_vars, blocks, comments)
    problem.c = c
    for number, line in enumerate(body[4:], start=5):
        parts = _numbers(line)
        try:
            k, b, i, j = (int(v) for v in parts[:4])
            value = float(parts[4])
        except (IndexError, ValueError) as e:
            raise InputError(f"malformed SDPA entry on data line {number}: {line!r}") from e
        if not (0 <= k <= n_vars and 1 <= b <= n_blocks):
            raise InputError(f"SDPA entry out of range on data line {number}: {line!r}")
        size = abs(blocks[b - 1])
        if not (1 <= i <= size and 1 <= j <= size):
            raise InputError(f"SDPA index out of block on data line {number}: {line!r}")
        problem.set_entry(k, b - 1, i - 1, j - 1, value)
    return problem


def read_sdpa(path: PathLike) -> SdpaProblem:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    return loads_sdpa(text)
