"""
问题文件 / 证书文件的 JSON 读写。

问题文件用 pydantic 校验，按规范化形式计算哈希；证书由固定顺序的序列化器写出
（17 位有效数字），同一输入总是得到相同的字节。
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError, model_validator

from src.core.errors import IoFailure, ProblemFileError
from src.core.recovery import ProblemSpec, Scenario
from src.core.scenarios import TwoSpaceSpec

logger = logging.getLogger(__name__)

TOOL_NAME = "orecover"
TOOL_VERSION = "0.1.0"

Matrix = List[List[float]]
PathLike = Union[str, Path]


def _shape(name: str, rows: Optional[Matrix], cols: Optional[int] = None) -> Optional[tuple]:
    if rows is None:
        return None
    if rows and any(len(r) != len(rows[0]) for r in rows):
        raise ValueError(f"{name} is not rectangular")
    width = len(rows[0]) if rows else 0
    if cols is not None and rows and width != cols:
        raise ValueError(f"{name} must have {cols} columns, got {width}")
    return len(rows), width


class ProblemFile(BaseModel):
    dim: Optional[int] = None
    Lambda: Matrix
    Q: Matrix
    R: Optional[Matrix] = None
    S: Optional[Matrix] = None
    epsilon: float = 1.0
    eta: float = 1.0
    scenario: Literal["exact", "two-space", "l2", "mixed", "l1"] = "exact"
    V: Optional[Matrix] = None
    W: Optional[Matrix] = None
    Sprime: Optional[Matrix] = None
    Sdoubleprime: Optional[Matrix] = None
    tol: Optional[float] = None
    seed: Optional[int] = None
    forms: Optional[List[Matrix]] = None

    @model_validator(mode="after")
    def check_dimensions(self) -> "ProblemFile":
        m, n = _shape("Lambda", self.Lambda)
        if m == 0:
            n = self.dim or 0
        elif self.dim is not None and self.dim != n:
            raise ValueError(f"dim = {self.dim} but Lambda has {n} columns")
        _shape("Q", self.Q, n)
        _shape("R", self.R, n)
        s_cols = m if self.scenario in ("l2", "mixed") else n
        _shape("S", self.S, s_cols)
        for name in ("Sprime", "Sdoubleprime"):
            _shape(name, getattr(self, name), m)
        for name in ("V", "W"):
            shape = _shape(name, getattr(self, name))
            if shape is not None and shape[0] != n:
                raise ValueError(f"{name} must have {n} rows (one basis vector per column)")
        for i, form in enumerate(self.forms or []):
            _shape(f"forms[{i}]", form, n)

        required = {
            "exact": ("R", "S"),
            "two-space": ("V", "W"),
            "l2": ("R",),
            "mixed": ("R", "Sprime", "Sdoubleprime"),
            "l1": ("R",),
        }[self.scenario]
        missing = [key for key in required if getattr(self, key) is None]
        if missing:
            raise ValueError(f"scenario {self.scenario!r} requires {', '.join(missing)}")
        return self

    @property
    def n(self) -> int:
        return len(self.Lambda[0]) if self.Lambda else (self.dim or 0)

    @property
    def m(self) -> int:
        return len(self.Lambda)

    def matrix(self, name: str, cols: Optional[int] = None) -> np.ndarray:
        value = getattr(self, name)
        if value is None:
            return np.zeros((0, self.n if cols is None else cols))
        arr = np.array(value, dtype=float)
        return arr.reshape(len(value), -1) if arr.size else np.zeros((len(value), cols or self.n))

    def to_spec(self) -> Union[ProblemSpec, TwoSpaceSpec]:
        Lambda, Q = self.matrix("Lambda"), self.matrix("Q")
        if self.scenario == "two-space":
            return TwoSpaceSpec(self.matrix("V"), self.matrix("W"), self.epsilon, self.eta, Lambda, Q)
        scenario = Scenario(self.scenario)
        if scenario == Scenario.L2:
            S = self.matrix("S", self.m) if self.S is not None else np.eye(self.m)
        elif scenario == Scenario.EXACT:
            S = self.matrix("S")
        else:
            S = np.zeros((0, self.m if scenario == Scenario.MIXED else self.n))
        return ProblemSpec(
            Lambda=Lambda,
            Q=Q,
            R=self.matrix("R"),
            S=S,
            epsilon=self.epsilon,
            eta=self.eta,
            scenario=scenario,
            S_prime=None if self.Sprime is None else self.matrix("Sprime", self.m),
            S_double=None if self.Sdoubleprime is None else self.matrix("Sdoubleprime", self.m),
        )


def problem_hash(problem: ProblemFile) -> str:
    canonical = json.dumps(problem.model_dump(exclude_none=True), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e


def _describe(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
        parts.append(f"{loc}: {err.get('msg')}")
    return "; ".join(parts)


def parse_problem(text: str, source: str = "<string>") -> ProblemFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    try:
        return ProblemFile.model_validate(data)
    except ValidationError as e:
        raise ProblemFileError(f"{source}: {_describe(e)}") from e


def load_problem(path: PathLike) -> ProblemFile:
    return parse_problem(_read_text(path), str(path))


def dumps_problem(problem: ProblemFile) -> str:
    return encode_json(problem.model_dump(exclude_none=True))


# ---------------------------------------------------------------------------
# certificates


class CertificateFile(BaseModel):
    tool: str = TOOL_NAME
    version: str = TOOL_VERSION
    input_hash: str
    scenario: str
    radius_sq: Optional[float] = None
    a_sharp: Optional[float] = None
    b_sharp: Optional[float] = None
    c_sharp: Optional[float] = None
    d_sharp: Optional[float] = None
    tau_sharp: Optional[float] = None
    limit_case: Optional[str] = None
    psd_residual: Optional[float] = None
    D: Matrix
    QD: Matrix
    extremal: Optional[List[float]] = None
    verdict: Optional[str] = None
    k: Optional[int] = None
    lower_bound: Optional[float] = None
    upper_bound: Optional[float] = None
    condition_margin: Optional[float] = None
    lb: Optional[List[float]] = None
    M_column: Optional[List[Optional[float]]] = None
    M_table: Optional[List[List[Optional[float]]]] = None
    oracle: Optional[Dict[str, Any]] = None

    @property
    def value(self) -> Optional[float]:
        """证书中映射的平方误差（半径或上界）。"""
        return self.radius_sq if self.radius_sq is not None else self.upper_bound


def _float_text(value: float) -> str:
    if not math.isfinite(value):
        return "null"
    text = "%.17g" % value
    return "0" if text == "-0" else text


def _encode(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _float_text(float(value))
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, np.ndarray):
        return _encode(value.tolist())
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in value.items()) + "}"
    raise TypeError(f"cannot encode {type(value).__name__}")


def encode_json(data: Dict[str, Any]) -> str:
    """顶层键每行一个，保持插入顺序。"""
    body = ",\n".join(f"  {json.dumps(key)}: {_encode(value)}" for key, value in data.items())
    return "{\n" + body + "\n}\n"


def dumps_certificate(cert: CertificateFile) -> str:
    return encode_json({name: getattr(cert, name) for name in CertificateFile.model_fields})


def write_certificate(cert: CertificateFile, path: PathLike) -> Path:
    path = Path(path)
    try:
        path.write_text(dumps_certificate(cert), encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    logger.info(f"[CLI] certificate written to {path}")
    return path


def load_certificate(path: PathLike) -> CertificateFile:
    text = _read_text(path)
    try:
        return CertificateFile.model_validate_json(text)
    except ValidationError as e:
        raise ProblemFileError(f"{path}: {_describe(e)}") from e
