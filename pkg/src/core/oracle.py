"""
蛮力 oracle：多个椭球交集上 sup h^T C h 的下界。

报告的点都可行，因此 best_value 不会超过真实上确界；结果只取决于 (输入, budget, seed)。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from src.core.ell1 import build_axis, check_l1_spec
from src.core.errors import InputError
from src.core.linalg import gram, polish_quadratic_max, sym
from src.core.recovery import ProblemSpec
from src.core.settings import ASCENT_STEPS, DEFAULT_BUDGET, DEFAULT_SEED

logger = logging.getLogger(__name__)

GRID = "Grid"
ASCENT = "MultiStartAscent"
VERTEX = "VertexEnum"

# 上升结束后用约束局部求解精修的起点数
POLISH_STARTS = 5


@dataclass(frozen=True, eq=False)
class OracleReport:
    best_value: float
    best_point: np.ndarray
    samples: int
    method: str
    seed: Optional[int] = None
    extra: Dict[str, Any] = field(default_factory=dict)


def _stack(forms: Sequence[np.ndarray], C: np.ndarray):
    C = sym(np.asarray(C, dtype=float))
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InputError(f"objective must be square, got shape {C.shape}")
    mats = np.array([sym(np.asarray(F, dtype=float)) for F in forms])
    if mats.ndim != 3 or mats.shape[1:] != C.shape:
        raise InputError("constraint forms must match the objective's shape")
    return mats, C


def _whitening(mats: np.ndarray, C: np.ndarray):
    """
    在 range(sum A_i) 上满足 W^T (sum A_i) W = I 的 W；C 在公共核上非零（上确界无穷）时返回 None。
    """
    w, V = sla.eigh(mats.sum(axis=0))
    top = max(float(w[-1]), 0.0)
    keep = w > 1e-12 * top if top > 0 else np.zeros(len(w), dtype=bool)
    K = V[:, ~keep]
    if K.shape[1] and np.linalg.norm(C @ K) > 1e-10 * (1.0 + np.linalg.norm(C)):
        return None
    return V[:, keep] / np.sqrt(w[keep])


def _feasible(mats: np.ndarray, C: np.ndarray, h: np.ndarray):
    peak = float(np.max(np.einsum("i,kij,j->k", h, mats, h))) if len(mats) else 0.0
    if peak > 1.0:
        h = h / np.sqrt(peak)
    return float(h @ C @ h), h


def _ascent(mats: np.ndarray, C: np.ndarray, X: np.ndarray, steps: int) -> np.ndarray:
    """
    在单位球面上极大化 x^T C x / max_i x^T A_i x，X 的各列同时迭代。
    方向取两个起作用比值梯度的最小范数组合并投影到切空间；成功则步长 x1.5，否则 x0.5。
    """
    cols = X.shape[1]
    idx = np.arange(cols)

    def evaluate(Y):
        AY = np.einsum("kij,js->kis", mats, Y)
        a = np.einsum("is,kis->ks", Y, AY)
        CY = C @ Y
        c = np.einsum("is,is->s", Y, CY)
        order = np.argsort(-a, axis=0)
        j1 = order[0]
        j2 = order[1] if len(mats) > 1 else order[0]
        a1 = np.maximum(a[j1, idx], 1e-300)
        return c / a1, AY, a, CY, j1, j2

    X = X / np.linalg.norm(X, axis=0)
    step = np.full(cols, 0.5)
    val, AY, a, CY, j1, j2 = evaluate(X)
    for _ in range(steps):
        a1 = np.maximum(a[j1, idx], 1e-300)
        a2 = np.maximum(a[j2, idx], 1e-300)
        v2 = np.einsum("is,is->s", X, CY) / a2
        g1 = 2.0 * (CY - val * AY[j1, :, idx].T) / a1
        g2 = 2.0 * (CY - v2 * AY[j2, :, idx].T) / a2
        diff = g1 - g2
        denom = np.einsum("is,is->s", diff, diff)
        safe = np.where(denom > 0, denom, 1.0)
        alpha = np.where(denom > 0, np.clip(-np.einsum("is,is->s", diff, g2) / safe, 0.0, 1.0), 1.0)
        d = alpha * g1 + (1.0 - alpha) * g2
        d = d - X * np.einsum("is,is->s", d, X)
        norm = np.linalg.norm(d, axis=0)
        moving = norm > 1e-14
        if not np.any(moving):
            break
        trial = X + np.where(moving, step / np.where(moving, norm, 1.0), 0.0) * d
        trial = trial / np.linalg.norm(trial, axis=0)
        t_val, t_AY, t_a, t_CY, t_j1, t_j2 = evaluate(trial)
        better = moving & (t_val > val)
        X = np.where(better, trial, X)
        val = np.where(better, t_val, val)
        AY = np.where(better[None, None, :], t_AY, AY)
        a = np.where(better[None, :], t_a, a)
        CY = np.where(better, t_CY, CY)
        j1 = np.where(better, t_j1, j1)
        j2 = np.where(better, t_j2, j2)
        step = np.where(better, step * 1.5, step * 0.5)
        step = np.maximum(step, 1e-12)
    return X


def sup_quadratic_ellipsoids(
    forms: Sequence[np.ndarray],
    C: np.ndarray,
    budget: int = DEFAULT_BUDGET,
    seed: int = DEFAULT_SEED,
    basis: Optional[np.ndarray] = None,
) -> OracleReport:
    """Lower bound for sup h^T C h over {h^T A_i h <= 1 for all i}."""
    mats, C = _stack(forms, C)
    p = C.shape[0]
    if p == 0 or not np.any(C):
        point = np.zeros(p if basis is None else basis.shape[0])
        return OracleReport(0.0, point, 0, ASCENT, seed)
    W = _whitening(mats, C)
    if W is None:
        logger.warning("[Oracle] objective is nonzero on the common kernel; supremum is infinite")
        return OracleReport(float("inf"), np.zeros(p), 0, ASCENT, seed)

    Wm = np.einsum("ia,kij,jb->kab", W, mats, W)
    Wc = sym(W.T @ C @ W)
    r = W.shape[1]
    starts = max(budget // ASCENT_STEPS, 1)
    children = np.random.SeedSequence(seed).spawn(starts)
    columns = [np.random.default_rng(child).standard_normal(r) for child in children]
    # 确定性起点：C 与 (C, sum A_i) 的最大特征向量
    columns.append(sla.eigh(Wc)[1][:, -1])
    columns.append(np.linalg.lstsq(W, sla.eigh(C)[1][:, -1], rcond=None)[0])
    X = np.column_stack([c if np.linalg.norm(c) > 0 else np.ones(r) for c in columns])

    X = _ascent(Wm, Wc, X, ASCENT_STEPS)
    peaks = np.max(np.einsum("is,kij,js->ks", X, Wm, X), axis=0)
    values = np.einsum("is,ij,js->s", X, Wc, X) / peaks
    value, h = -np.inf, None
    for i in np.argsort(-values, kind="stable")[:POLISH_STARTS]:
        x0 = X[:, i] / np.sqrt(peaks[i])
        for x in (x0, polish_quadratic_max(Wm, Wc, x0)):
            v, x = _feasible(Wm, Wc, x)
            if v > value:
                value, h = v, x
    value, h = _feasible(mats, C, W @ h)
    value = max(value, 0.0)
    if basis is not None:
        h = basis @ h
    logger.debug(f"[Oracle] {X.shape[1]} starts, best {value:.12g}")
    return OracleReport(value, h, X.shape[1] * ASCENT_STEPS, ASCENT, seed)


def sup_quadratic_two_ellipsoids(
    A: np.ndarray,
    B: np.ndarray,
    C: np.ndarray,
    basis: Optional[np.ndarray] = None,
    budget: int = DEFAULT_BUDGET,
    seed: int = DEFAULT_SEED,
) -> OracleReport:
    return sup_quadratic_ellipsoids([A, B], C, budget, seed, basis)


def _grid_directions(p: int, resolution: int) -> np.ndarray:
    if p == 1:
        return np.ones((1, 1))
    if p == 2:
        t = np.linspace(0.0, np.pi, resolution, endpoint=False)
        return np.vstack([np.cos(t), np.sin(t)])
    # 比值是偶函数，半球即可
    theta = np.linspace(0.0, np.pi, resolution)
    phi = np.linspace(0.0, np.pi, resolution, endpoint=False)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    return np.vstack([
        (np.sin(T) * np.cos(P)).ravel(),
        (np.sin(T) * np.sin(P)).ravel(),
        np.cos(T).ravel(),
    ])


def sup_quadratic_grid(forms: Sequence[np.ndarray], C: np.ndarray,
                       resolution: Optional[int] = None) -> OracleReport:
    """在方向网格上做径向极大化（维数不超过 3）。"""
    mats, C = _stack(forms, C)
    p = C.shape[0]
    if p == 0 or not np.any(C):
        return OracleReport(0.0, np.zeros(p), 0, GRID)
    if p > 3:
        raise InputError(f"grid oracle supports dimension <= 3, got {p}")
    X = _grid_directions(p, resolution or (2000 if p <= 2 else 400))
    c = np.einsum("is,ij,js->s", X, C, X)
    peaks = np.max(np.einsum("is,kij,js->ks", X, mats, X), axis=0)
    floor = 1e-14 * max(float(np.max(np.abs(mats))), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(peaks > floor, c / np.maximum(peaks, floor), np.where(c > 0, np.inf, 0.0))
    best = int(np.argmax(values))
    if not np.isfinite(values[best]):
        return OracleReport(float("inf"), X[:, best], X.shape[1], GRID)
    value, h = _feasible(mats, C, X[:, best] / np.sqrt(peaks[best]))
    return OracleReport(max(value, 0.0), h, X.shape[1], GRID)


def l1_worstcase_vertex(L: np.ndarray, spec: ProblemSpec, budget: int = DEFAULT_BUDGET,
                        seed: int = DEFAULT_SEED) -> OracleReport:
    """
    线性映射 L (q x m) 的 ℓ1 平方最坏误差：最坏数据误差在顶点 theta e_i 处，逐轴枚举。
    """
    check_l1_spec(spec)
    L = np.asarray(L, dtype=float)
    if L.shape != (spec.Q.shape[0], spec.m):
        raise InputError(f"linear map must be {spec.Q.shape[0]}x{spec.m}, got {L.shape}")
    reports = []
    for i in range(spec.m):
        axis = build_axis(spec, i)
        E = axis.error_map(L, spec.Q, spec.Lambda)
        reports.append(sup_quadratic_ellipsoids([gram(axis.R), gram(axis.S)], gram(E), budget, seed))
    values = [r.best_value for r in reports]
    i = int(np.argmax(values))
    return OracleReport(
        best_value=values[i],
        best_point=reports[i].best_point,
        samples=sum(r.samples for r in reports),
        method=VERTEX,
        seed=seed,
        extra={"axis": i, "per_axis": values},
    )
