"""
ℓ1 不准确观测：y = Lambda f + e, ||e||_1 <= eta.

每个坐标轴 j 对应 (h, theta) ∈ R^n x R 上的扩展问题，数据误差为 theta e_j。
由逐轴下界 lb'_j、逐轴映射和 M 表判断 Q o Delta^(k) 是否最优（k = argmax lb'_j）；
否则只返回上下界，由 minimax_linear 在线性映射中继续搜索。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla

from src.core.dominance import DominanceProblem, ParamCertificate, extremizer, sdominance_solve
from src.core.errors import InputError, Unbounded
from src.core.linalg import gram, numerical_rank
from src.core.recovery import (
    ZERO_RADIUS,
    ProblemSpec,
    RadiusCertificate,
    RecoveryMap,
    Scenario,
    constrained_lsq,
    lexicographic_lsq,
    worst_case_dual,
)
from src.core.sdpa import SdpaProblem, write_sdpa
from src.core.settings import DEFAULT_TOL, SFL1_SLACK
from src.utils.parallel import map_ordered

logger = logging.getLogger(__name__)

HOLDS = "Holds"
BEST_EFFORT = "BestEffort"


@dataclass(frozen=True, eq=False)
class ExtendedAxisMaps:
    """单个坐标轴上 g = (h, theta) 的分块矩阵。"""

    j: int
    Gamma: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray

    def error_map(self, L: np.ndarray, Q: np.ndarray, Lambda: np.ndarray) -> np.ndarray:
        """[Q - L Lambda | -Q u_j] for a linear map L acting on the data."""
        return np.hstack([Q - L @ Lambda, self.Q[:, -1:]])


@dataclass(eq=False)
class L1Workspace:
    spec: ProblemSpec
    U: np.ndarray
    lb: np.ndarray
    params: List[Tuple[float, float]]
    certs: List[ParamCertificate]
    k: int
    M: np.ndarray
    maps: Dict[int, RecoveryMap] = field(default_factory=dict)
    m_certs: Dict[Tuple[int, int], ParamCertificate] = field(default_factory=dict)
    condition_holds: Optional[bool] = None
    margin: Optional[float] = None
    workers: Optional[int] = None

    @property
    def m(self) -> int:
        return self.spec.m


@dataclass(frozen=True, eq=False)
class BestEffort:
    """lb'_k 是最优误差的下界，upper 是 Q o Delta^(k) 误差的上界。"""

    lower: float
    upper: float
    map: RecoveryMap
    k: int


@dataclass(frozen=True, eq=False)
class L1Solution:
    verdict: str
    result: Union[RadiusCertificate, BestEffort]
    workspace: L1Workspace

    def __iter__(self):
        return iter((self.verdict, self.result))


@dataclass(frozen=True, eq=False)
class MinimaxResult:
    D: np.ndarray
    value: float
    iterations: int
    converged: bool
    history: List[float]


def check_l1_spec(spec: ProblemSpec) -> None:
    if spec.scenario != Scenario.L1:
        raise InputError(f"expected an l1 spec, got {spec.scenario.value}")
    if numerical_rank(spec.R) < spec.n:
        raise Unbounded("R must be injective for l1-inaccurate data (M entries would be infinite)")
    spec.validate()


def build_axis(spec: ProblemSpec, j: int) -> ExtendedAxisMaps:
    if not 0 <= j < spec.m:
        raise InputError(f"axis {j} out of range 0..{spec.m - 1}")
    n = spec.n
    u = spec.lambda_pinv[:, j:j + 1]
    S = np.zeros((1, n + 1))
    S[0, n] = 1.0 / spec.eta
    return ExtendedAxisMaps(
        j=j,
        Gamma=np.hstack([spec.Lambda, np.zeros((spec.m, 1))]),
        Q=np.hstack([spec.Q, -spec.Q @ u]),
        R=np.hstack([spec.R, -spec.R @ u]) / spec.epsilon,
        S=S,
    )


def _axis_lower_bound(spec: ProblemSpec, tol: float, j: int) -> ParamCertificate:
    axis = build_axis(spec, j)
    # ker Gamma = ker Lambda x R
    Z = sla.block_diag(spec.nullspace, np.ones((1, 1)))
    problem = DominanceProblem.from_forms(
        gram(axis.R @ Z),
        gram(axis.S @ Z),
        gram(axis.Q @ Z),
        labels=(f"R^({j})", "S~", f"Q^({j})"),
        basis=Z,
        on_kernel=Unbounded,
    )
    return sdominance_solve(problem, tol)


def _argmax_first(values: np.ndarray) -> int:
    top = float(np.max(values))
    return int(np.flatnonzero(values >= top - 1e-12 * (1.0 + abs(top)))[0])


def solve_lb_all(spec: ProblemSpec, tol: float = DEFAULT_TOL, workers: Optional[int] = None) -> L1Workspace:
    check_l1_spec(spec)
    m = spec.m
    certs = map_ordered(partial(_axis_lower_bound, spec, tol), range(m), workers)
    lb = np.array([c.a + c.b for c in certs])
    params = [(c.a / spec.epsilon ** 2, c.b / spec.eta ** 2) for c in certs]
    k = _argmax_first(lb)
    M = np.full((m, m), np.nan)
    logger.info(f"[L1] lower bounds {np.array2string(lb, precision=6)}; k = {k}")
    return L1Workspace(
        spec=spec, U=spec.lambda_pinv, lb=lb, params=params, certs=certs, k=k, M=M, workers=workers
    )


def axis_map(spec: ProblemSpec, j: int, c: float, d: float) -> RecoveryMap:
    """
    y -> argmin c||Rf||^2 + d (y_j - lambda_j f)^2
    s.t. lambda_i f = y_i (i != j) 的矩阵。
    """
    if c < 0 or d < 0 or (c == 0 and d == 0):
        raise InputError(f"axis map needs c, d >= 0 not both zero (c={c}, d={d})")
    n, m = spec.n, spec.m
    others = [i for i in range(m) if i != j]
    B = spec.Lambda[others]
    b = np.eye(m)[others]
    row = spec.Lambda[j:j + 1]
    e_j = np.eye(m)[j:j + 1]
    zeros_r = np.zeros((spec.R.shape[0], m))
    if c > 0 and d > 0:
        A = np.vstack([np.sqrt(c) * spec.R, np.sqrt(d) * row])
        a = np.vstack([zeros_r, np.sqrt(d) * e_j])
        D, case = constrained_lsq(A, a, B, b), "none"
    elif c > 0:
        D, case = constrained_lsq(spec.R, zeros_r, B, b), "d=0"
    else:
        D, case = lexicographic_lsq(row, e_j, spec.R, zeros_r, B, b), "c=0"
    D = np.asarray(D).reshape(n, m)
    return RecoveryMap(D=D, QD=spec.Q @ D, a=c, b=d, limit_case=case)


def ensure_map(ws: L1Workspace, j: int) -> RecoveryMap:
    if j not in ws.maps:
        c, d = ws.params[j]
        if c == 0.0 and d == 0.0:
            # lb'_j = 0：Q^(j) 在 ker Gamma 上为零，任意正权重都可以
            ws.maps[j] = replace(axis_map(ws.spec, j, 1.0, 1.0), a=0.0, b=0.0, limit_case=ZERO_RADIUS)
        else:
            ws.maps[j] = axis_map(ws.spec, j, c, d)
    return ws.maps[j]


def _axis_error_dual(spec: ProblemSpec, L: np.ndarray, tol: float,
                     i: int) -> Tuple[float, ParamCertificate, DominanceProblem, ExtendedAxisMaps]:
    axis = build_axis(spec, i)
    value, cert, problem = worst_case_dual(axis.error_map(L, spec.Q, spec.Lambda), axis.R, axis.S, tol)
    return value, cert, problem, axis


def compute_M(spec: ProblemSpec, ws: L1Workspace, i: int, j: int, tol: float = DEFAULT_TOL) -> float:
    """M_{i,j}：Q o Delta^(j) 在第 i 轴上的全空间支配值。"""
    rmap = ensure_map(ws, j)
    value, cert, _, _ = _axis_error_dual(spec, rmap.QD, tol, i)
    ws.M[i, j] = value
    ws.m_certs[(i, j)] = cert
    return value


def _compute_column(spec: ProblemSpec, ws: L1Workspace, j: int, tol: float) -> np.ndarray:
    ensure_map(ws, j)
    map_ordered(lambda i: compute_M(spec, ws, i, j, tol), range(ws.m), ws.workers)
    return ws.M[:, j]


def compute_M_table(spec: ProblemSpec, ws: L1Workspace, tol: float = DEFAULT_TOL) -> np.ndarray:
    for j in range(ws.m):
        _compute_column(spec, ws, j, tol)
    diag_gap = float(np.max(np.abs(np.diag(ws.M) - ws.lb) / (1.0 + ws.lb)))
    if diag_gap > 1e-8:
        logger.warning(f"[L1] diagonal M_jj differs from lb'_j by {diag_gap:.3e}")
    return ws.M


def l1_worst_case(spec: ProblemSpec, L: np.ndarray, tol: float = DEFAULT_TOL,
                  workers: Optional[int] = None) -> Tuple[float, np.ndarray]:
    """线性映射 L (q x m) 的平方最坏误差：各轴取最大。"""
    check_l1_spec(spec)
    L = np.asarray(L, dtype=float)
    if L.shape != (spec.Q.shape[0], spec.m):
        raise InputError(f"linear map must be {spec.Q.shape[0]}x{spec.m}, got {L.shape}")
    values = np.array(map_ordered(lambda i: _axis_error_dual(spec, L, tol, i)[0], range(spec.m), workers))
    return float(np.max(values)), values


def l1_optimal_solve(spec: ProblemSpec, tol: float = DEFAULT_TOL, full_table: bool = False,
                     workers: Optional[int] = None) -> L1Solution:
    ws = solve_lb_all(spec, tol, workers)
    k = ws.k
    column = _compute_column(spec, ws, k, tol)
    if full_table:
        compute_M_table(spec, ws, tol)
    m_kk = float(column[k])
    upper = float(np.max(column))
    ws.margin = upper - m_kk
    ws.condition_holds = bool(np.all(column <= m_kk + SFL1_SLACK * (1.0 + m_kk)))
    rmap = ws.maps[k]
    lb_k = float(ws.lb[k])
    if ws.condition_holds:
        logger.info(f"[L1] condition holds (margin {ws.margin:.3e}); radius^2 = {lb_k:.12g}")
        cert = RadiusCertificate(radius_sq=lb_k, params=ws.certs[k], map=rmap)
        return L1Solution(HOLDS, cert, ws)
    logger.warning(f"[L1] condition fails (margin {ws.margin:.3e}); bracket [{lb_k:.6g}, {upper:.6g}]")
    return L1Solution(BEST_EFFORT, BestEffort(lower=lb_k, upper=upper, map=rmap, k=k), ws)


# ---------------------------------------------------------------------------
# minimax over linear maps


def _objective(spec: ProblemSpec, D: np.ndarray, tol: float,
               workers: Optional[int] = None) -> Tuple[float, np.ndarray]:
    """F(D) = max_i f_i(D)，次梯度取自最坏轴的极值点。"""
    results = map_ordered(lambda i: _axis_error_dual(spec, D, tol, i), range(spec.m), workers)
    values = np.array([r[0] for r in results])
    worst = int(np.argmax(values))
    _, cert, problem, axis = results[worst]
    g = problem.to_caller(extremizer(problem, cert).h)
    residual = axis.error_map(D, spec.Q, spec.Lambda) @ g
    G = -2.0 * np.outer(residual, axis.Gamma @ g)
    return float(values[worst]), G


def minimax_linear(spec: ProblemSpec, ws: L1Workspace, iters: int = 200,
                   tol: float = 1e-6, dual_tol: float = DEFAULT_TOL) -> MinimaxResult:
    """
    从 D_0 = Q Delta^(k) 出发对 F(D) = max_i sup ||Q^(i) g - D Gamma g||^2 做次梯度下降。
    最优性条件成立时用指向 lb'_k 的 Polyak 步长，否则用 rho / sqrt(t)；保留最好的迭代点。
    """
    D0 = ensure_map(ws, ws.k).QD
    lower = float(np.max(ws.lb))
    rho = 0.1 * float(np.linalg.norm(D0)) + 0.1
    D = D0.copy()
    value, G = _objective(spec, D, dual_tol, ws.workers)
    best_D, best = D.copy(), value
    history = [best]
    converged = False
    t = 0
    for t in range(iters):
        if best - lower <= tol * (1.0 + best):
            converged = True
            break
        g_norm = float(np.linalg.norm(G))
        if g_norm == 0.0:
            converged = True
            break
        if ws.condition_holds:
            D = D - (value - lower) / g_norm ** 2 * G
        else:
            D = D - rho / np.sqrt(t + 1.0) * G / g_norm
        value, G = _objective(spec, D, dual_tol, ws.workers)
        if value < best:
            best_D, best = D.copy(), value
        history.append(best)
    else:
        t = iters
    if not converged and best - lower <= tol * (1.0 + best):
        converged = True

    if best < lower - tol * (1.0 + lower):
        logger.warning(f"[Minimax] value {best:.12g} below the lower bound {lower:.12g}")
    if not converged:
        logger.warning(f"[Minimax] iteration cap {iters} reached; gap to lower bound {best - lower:.3e}")
    logger.info(f"[Minimax] F = {best:.12g} after {t} iterations")
    return MinimaxResult(D=best_D, value=best, iterations=t, converged=converged, history=history)


# ---------------------------------------------------------------------------
# SDPA export


def sdpa_variable_counts(m: int, q: int) -> Tuple[int, int]:
    """(文件中的变量数（Delta 拆成正负两部分），逻辑变量数)。"""
    return 1 + 2 * m + 2 * q * m, 1 + 2 * m + q * m


def build_sdpa(spec: ProblemSpec) -> SdpaProblem:
    """
    minimize gamma，对每个轴 i：
        [[I, Q^(i) - Delta Gamma], [., a_i R^(i)T R^(i) + b_i S~T S~]] >= 0,
        a_i + b_i <= gamma, a_i, b_i >= 0。
    变量顺序：gamma，(a_i, b_i) 对，Delta+ 按行，Delta- 按行。
    """
    check_l1_spec(spec)
    m, n, q = spec.m, spec.n, spec.Q.shape[0]
    n_vars, logical = sdpa_variable_counts(m, q)
    size = q + n + 1
    comments = [
        "orecover l1 linear-map SDP",
        f"variables: file {n_vars}, logical {logical}",
        "layout: gamma, (a_i, b_i), Delta+ row-major, Delta- row-major",
    ]
    problem = SdpaProblem.empty(n_vars, [size] * m + [-(3 * m + 2 * q * m)], comments)
    problem.c[0] = 1.0

    gamma = 1
    delta_plus = 2 + 2 * m
    delta_minus = delta_plus + q * m
    lp = m
    for i in range(m):
        axis = build_axis(spec, i)
        a_var, b_var = 2 + 2 * i, 3 + 2 * i
        for r in range(q):
            problem.set_entry(0, i, r, r, -1.0)
            for col in range(n + 1):
                if axis.Q[r, col] != 0.0:
                    problem.set_entry(0, i, r, q + col, -axis.Q[r, col])
        for var, form in ((a_var, gram(axis.R)), (b_var, gram(axis.S))):
            for row in range(n + 1):
                for col in range(row, n + 1):
                    if form[row, col] != 0.0:
                        problem.set_entry(var, i, q + row, q + col, form[row, col])
        for r in range(q):
            for s in range(m):
                for col in range(n + 1):
                    g = axis.Gamma[s, col]
                    if g != 0.0:
                        problem.set_entry(delta_plus + r * m + s, i, r, q + col, -g)
                        problem.set_entry(delta_minus + r * m + s, i, r, q + col, g)
        # gamma - a_i - b_i >= 0, a_i >= 0, b_i >= 0
        problem.set_entry(gamma, lp, i, i, 1.0)
        problem.set_entry(a_var, lp, i, i, -1.0)
        problem.set_entry(b_var, lp, i, i, -1.0)
        problem.set_entry(a_var, lp, m + 2 * i, m + 2 * i, 1.0)
        problem.set_entry(b_var, lp, m + 2 * i + 1, m + 2 * i + 1, 1.0)
    for t in range(2 * q * m):
        problem.set_entry(delta_plus + t, lp, 3 * m + t, 3 * m + t, 1.0)
    return problem


def sdpa_point(spec: ProblemSpec, L: np.ndarray) -> np.ndarray:
    """由逐轴对偶证书构造线性映射 L 的 SDPA 可行点。"""
    m, q = spec.m, spec.Q.shape[0]
    x = np.zeros(sdpa_variable_counts(m, q)[0])
    for i in range(m):
        _, cert, _, _ = _axis_error_dual(spec, L, DEFAULT_TOL, i)
        x[1 + 2 * i], x[2 + 2 * i] = cert.a, cert.b
    x[0] = float(np.max(x[1:1 + 2 * m].reshape(m, 2).sum(axis=1)))
    start = 1 + 2 * m
    flat = np.asarray(L, dtype=float).reshape(-1)
    x[start:start + q * m] = np.maximum(flat, 0.0)
    x[start + q * m:] = np.maximum(-flat, 0.0)
    return x


def export_sdpa(spec: ProblemSpec, ws: Optional[L1Workspace], path: Union[str, Path]) -> SdpaProblem:
    problem = build_sdpa(spec)
    write_sdpa(problem, path)
    n_vars, logical = sdpa_variable_counts(spec.m, spec.Q.shape[0])
    k_note = "" if ws is None else f", lb'_k = {ws.lb[ws.k]:.12g}"
    logger.info(f"[SDPA] {spec.m} PSD blocks of size {spec.Q.shape[0] + spec.n + 1}; "
                f"variables {n_vars} (logical {logical}){k_note}")
    return problem
