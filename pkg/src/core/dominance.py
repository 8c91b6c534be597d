"""
S-procedure 核心：在子空间 W 上求解

    minimize a + b   s.t.   a*A + b*B >= C,

构造极值点，验证二次型支配关系，以及 n > 2 个椭球时的诊断。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional, Sequence, Tuple, Type

import numpy as np
import scipy.linalg as sla
from scipy.optimize import nnls

from src.core.errors import (
    DegenerateParameters,
    Infeasible,
    InputError,
    NoUnitEigenvalue,
    NotPositiveDefinite,
    PremiseViolated,
    RecoveryError,
)
from src.core.linalg import as_matrix, gen_eig, gen_eig_max, min_eig, polish_quadratic_max, sym
from src.core.settings import DEFAULT_TOL, NULLSPACE_TOL, TAU_HI, TAU_LO, TAU_WIDTH

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
# 平坦极小检测：下水平集容差与最小宽度
_FLAT_LEVEL = 1e-13
_FLAT_STEP = 1e-4
_ZERO_C = 1e-24


def _scale(M: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0


@dataclass(frozen=True, eq=False)
class DominanceProblem:
    """
    p 维子空间（正交基）上的三个对称半正定二次型。

    ``basis``（caller_dim x p）把问题坐标映回调用方坐标；None 表示恒等。
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    labels: Tuple[str, str, str] = ("A", "B", "C")
    basis: Optional[np.ndarray] = None

    def __post_init__(self):
        mats = []
        for name, M in zip(self.labels, (self.A, self.B, self.C)):
            M = np.asarray(M, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise InputError(f"form {name} must be square, got shape {M.shape}")
            if not np.all(np.isfinite(M)):
                raise InputError(f"form {name} has non-finite entries")
            if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * _scale(M):
                raise InputError(f"form {name} is not symmetric")
            M = sym(M)
            if M.size and min_eig(M) < -1e-10 * _scale(M):
                raise InputError(f"form {name} is not positive semidefinite")
            mats.append(M)
        if not (mats[0].shape == mats[1].shape == mats[2].shape):
            raise InputError("forms must share one dimension")
        object.__setattr__(self, "A", mats[0])
        object.__setattr__(self, "B", mats[1])
        object.__setattr__(self, "C", mats[2])
        if self.p:
            w = sla.eigvalsh(self.A + self.B)
            if w[-1] <= 0.0 or w[0] <= 1e-14 * w[-1]:
                raise InputError(
                    f"ker {self.labels[0]} and ker {self.labels[1]} intersect nontrivially"
                )

    @property
    def p(self) -> int:
        return self.A.shape[0]

    def c_is_zero(self) -> bool:
        # SVD 零空间基算出的 Q N 会在 C 中留下 O(eps^2) 的残量
        if not self.C.size:
            return True
        return float(np.max(np.abs(self.C))) <= _ZERO_C * _scale(self.A + self.B)

    def to_caller(self, h: np.ndarray) -> np.ndarray:
        return h if self.basis is None else self.basis @ h

    @classmethod
    def from_forms(
        cls,
        A: np.ndarray,
        B: np.ndarray,
        C: np.ndarray,
        labels: Tuple[str, str, str] = ("A", "B", "C"),
        basis: Optional[np.ndarray] = None,
        on_kernel: Type[RecoveryError] = Infeasible,
    ) -> "DominanceProblem":
        """
        构造问题；ker A ∩ ker B 非平凡时先压缩到 range(A + B)。
        C 必须在该交集上为零，否则抛出 ``on_kernel``。
        """
        A, B, C = sym(np.asarray(A, float)), sym(np.asarray(B, float)), sym(np.asarray(C, float))
        p = A.shape[0]
        if p == 0:
            return cls(A, B, C, labels, basis)
        w, V = sla.eigh(A + B)
        keep = w > NULLSPACE_TOL * max(w[-1], 0.0) if w[-1] > 0 else np.zeros(p, dtype=bool)
        if np.all(keep):
            return cls(A, B, C, labels, basis)
        K = V[:, ~keep]
        if np.linalg.norm(C @ K, 2) > 1e-8 * _scale(C):
            raise on_kernel(
                f"{labels[2]} is nonzero on ker {labels[0]} ∩ ker {labels[1]} "
                f"(dimension {K.shape[1]})"
            )
        U = V[:, keep]
        logger.debug(f"[Dominance] compressed common kernel of dimension {K.shape[1]}")
        new_basis = U if basis is None else basis @ U
        return cls(U.T @ A @ U, U.T @ B @ U, U.T @ C @ U, labels, new_basis)


@dataclass(frozen=True, eq=False)
class ParamCertificate:
    a: float
    b: float
    tau: float
    lam: float
    psd_residual: float
    tau_tolerance: float = TAU_WIDTH
    endpoint: str = "interior"

    @property
    def value(self) -> float:
        return self.a + self.b


@dataclass(frozen=True, eq=False)
class ExtremalPoint:
    h: np.ndarray
    norms: Tuple[float, float]
    stationarity_residual: float
    ambient: Optional[np.ndarray] = None
    value: float = 0.0


def phi(problem: DominanceProblem, tau: float) -> float:
    """C v = lam ((1 - tau) A + tau B) v 的最大特征值。"""
    if problem.p == 0 or problem.c_is_zero():
        return 0.0
    T = (1.0 - tau) * problem.A + tau * problem.B
    return gen_eig_max(problem.C, T)[0]


def _phi_slope(problem: DominanceProblem, tau: float) -> Tuple[float, float]:
    T = (1.0 - tau) * problem.A + tau * problem.B
    lam, v = gen_eig_max(problem.C, T)
    return lam, -lam * float(v @ (problem.B - problem.A) @ v)


def _phi_or_inf(problem: DominanceProblem, tau: float) -> float:
    try:
        return phi(problem, tau)
    except NotPositiveDefinite:
        return np.inf


def _restricted_pencil(C: np.ndarray, F: np.ndarray, tol: float = DEFAULT_TOL):
    """
    (U, U^T C U, U^T F U)，U 为 range(F) 的正交基；C 在 ker F 上不为零时返回 None。
    """
    w, V = sla.eigh(sym(F))
    top = max(w[-1], 0.0) if w.size else 0.0
    keep = w > NULLSPACE_TOL * top if top > 0 else np.zeros(w.size, dtype=bool)
    if np.all(keep):
        return np.eye(F.shape[0]), C, F
    K = V[:, ~keep]
    if np.linalg.norm(C @ K, 2) > max(tol, 1e-10) * _scale(C):
        return None
    U = V[:, keep]
    return U, U.T @ C @ U, U.T @ F @ U


def _endpoint_value(C: np.ndarray, F: np.ndarray, tol: float) -> Optional[float]:
    restricted = _restricted_pencil(C, F, tol)
    if restricted is None:
        return None
    U, Cr, Fr = restricted
    if U.shape[1] == 0:
        return 0.0 if not np.any(C) else None
    try:
        return gen_eig_max(Cr, Fr)[0]
    except NotPositiveDefinite:
        return None


def _tau_search(problem: DominanceProblem) -> Tuple[float, int]:
    """在 [TAU_LO, TAU_HI] 上三分搜索 argmin phi，数值持平时按斜率判断。"""
    lo, hi = TAU_LO, TAU_HI
    evals = 0
    while hi - lo > TAU_WIDTH:
        third = (hi - lo) / 3.0
        m1, m2 = lo + third, hi - third
        f1, f2 = _phi_or_inf(problem, m1), _phi_or_inf(problem, m2)
        evals += 2
        if not np.isfinite(f1) or not np.isfinite(f2):
            if np.isfinite(f1):
                hi = m2
            elif np.isfinite(f2):
                lo = m1
            else:
                lo, hi = m1, m2
            continue
        noise = 8.0 * _EPS * max(abs(f1), abs(f2), 1e-300)
        if f1 < f2 - noise:
            hi = m2
        elif f2 < f1 - noise:
            lo = m1
        else:
            mid = 0.5 * (m1 + m2)
            lam, slope = _phi_slope(problem, mid)
            evals += 1
            if slope > 1e-12 * (1.0 + lam):
                hi = m2
            elif slope < -1e-12 * (1.0 + lam):
                lo = m1
            else:
                lo, hi = m1, m2
    return 0.5 * (lo + hi), evals


def _flat_midpoint(problem: DominanceProblem, tau: float, lam: float) -> float:
    """下水平集 {phi <= lam + tiny} 足够宽时取其中点。"""
    level = lam + _FLAT_LEVEL * (1.0 + lam)

    def inside(t: float) -> bool:
        return _phi_or_inf(problem, t) <= level

    left_trial = max(TAU_LO, tau - _FLAT_STEP)
    right_trial = min(TAU_HI, tau + _FLAT_STEP)
    if not (inside(left_trial) or inside(right_trial)):
        return tau

    def edge(inner: float, outer: float) -> float:
        if inside(outer):
            return outer
        for _ in range(60):
            mid = 0.5 * (inner + outer)
            if inside(mid):
                inner = mid
            else:
                outer = mid
        return inner

    left = edge(tau, TAU_LO)
    right = edge(tau, TAU_HI)
    if right - left < _FLAT_STEP:
        return tau
    logger.debug(f"[Dominance] flat minimum on [{left:.6g}, {right:.6g}]")
    return 0.5 * (left + right)


def _certificate(problem: DominanceProblem, tau: float, lam: float, endpoint: str,
                 width: float = TAU_WIDTH) -> ParamCertificate:
    a, b = (1.0 - tau) * lam, tau * lam
    residual = min_eig(a * problem.A + b * problem.B - problem.C) if problem.p else 0.0
    trace_c = float(np.trace(problem.C)) if problem.p else 0.0
    if residual < -1e-8 * (1.0 + trace_c):
        logger.warning(f"[Dominance] certificate residual {residual:.3e} below tolerance")
    return ParamCertificate(a=a, b=b, tau=tau, lam=lam, psd_residual=residual,
                            tau_tolerance=width, endpoint=endpoint)


def sdominance_solve(problem: DominanceProblem, tol: float = DEFAULT_TOL) -> ParamCertificate:
    """
    min a + b s.t. aA + bB >= C 的最优 (a, b)。

    phi 是凸函数，三分搜索得 lam = min_tau phi(tau)；之后比较端点：单个二次型的端点值
    （奇异时在其值域上计算，要求 C 在补空间上为零）严格更小则取端点。
    """
    if problem.p == 0 or problem.c_is_zero():
        return _certificate(problem, 0.5, 0.0, "zero", width=0.0)

    tau, evals = _tau_search(problem)
    lam = phi(problem, tau)
    tau = _flat_midpoint(problem, tau, lam)
    lam = phi(problem, tau)
    endpoint = "interior"

    margin = 16.0 * _EPS * (1.0 + lam)
    for tau_end, form in ((0.0, problem.A), (1.0, problem.B)):
        value = _endpoint_value(problem.C, form, tol)
        if value is not None and value < lam - margin:
            tau, lam, endpoint = tau_end, value, f"tau{int(tau_end)}"

    logger.debug(f"[Dominance] tau*={tau:.12g} lambda*={lam:.15g} ({endpoint}, {evals} evaluations)")
    return _certificate(problem, tau, lam, endpoint)


def _single_form_direction(C: np.ndarray, F: np.ndarray) -> np.ndarray:
    restricted = _restricted_pencil(C, F)
    if restricted is None:
        raise Infeasible("objective form is nonzero on the kernel of the active form")
    U, Cr, Fr = restricted
    if U.shape[1] == 0:
        return np.zeros(C.shape[0])
    return U @ gen_eig_max(Cr, Fr)[1]


def _balanced_combination(V: np.ndarray, D: np.ndarray) -> np.ndarray:
    """限制后的 D 不定时，在 span(V) 中取满足 x^T D x = 0 的向量。"""
    w, E = sla.eigh(sym(V.T @ D @ V))
    if w[0] <= 0.0 <= w[-1] and (w[-1] > 0.0 or w[0] < 0.0):
        x = np.sqrt(w[-1]) * E[:, 0] + np.sqrt(-w[0]) * E[:, -1]
    else:
        x = E[:, int(np.argmin(np.abs(w)))]
    return V @ x


def _orient(h: np.ndarray) -> np.ndarray:
    if h.size and h[int(np.argmax(np.abs(h)))] < 0:
        return -h
    return h


def _extremal(problem: DominanceProblem, h: np.ndarray, T: np.ndarray) -> ExtremalPoint:
    h = _orient(h)
    a_sq = float(h @ problem.A @ h)
    b_sq = float(h @ problem.B @ h)
    residual = float(np.linalg.norm((T - problem.C) @ h))
    return ExtremalPoint(
        h=h,
        norms=(float(np.sqrt(max(a_sq, 0.0))), float(np.sqrt(max(b_sq, 0.0)))),
        stationarity_residual=residual,
        ambient=None if problem.basis is None else problem.basis @ h,
        value=float(h @ problem.C @ h),
    )


def extremal_point(problem: DominanceProblem, cert: ParamCertificate, tol: float = 1e-6) -> ExtremalPoint:
    """
    由 (C, a A + b B) 特征值 1 的特征子空间构造最坏元素 h，h^T A h = 1。
    特征值重数大于 1 时在子空间内组合，使 h^T A h = h^T B h。
    """
    if cert.a <= 0.0 or cert.b <= 0.0:
        raise DegenerateParameters(f"extremal point needs a, b > 0 (a={cert.a:.3g}, b={cert.b:.3g})")
    T = cert.a * problem.A + cert.b * problem.B
    res = gen_eig(problem.C, T)
    lam = float(res.values[0])
    if abs(lam - 1.0) > tol:
        raise NoUnitEigenvalue(f"top eigenvalue of (C, aA + bB) is {lam:.12g}, expected 1")
    cluster = res.values >= lam - tol * max(1.0, lam)
    V = res.vectors[:, cluster]
    v = V[:, 0] if V.shape[1] == 1 else _balanced_combination(V, problem.A - problem.B)
    a_sq = float(v @ problem.A @ v)
    if a_sq <= 1e-300:
        raise DegenerateParameters("top eigenvector has vanishing A-seminorm")
    return _extremal(problem, v / np.sqrt(a_sq), T)


def extremizer(problem: DominanceProblem, cert: ParamCertificate) -> ExtremalPoint:
    """
    {h^T A h <= 1, h^T B h <= 1} 上 h^T C h 的极大点：a, b > 0 时为极值点，
    否则取起作用二次型的单椭球极大点并缩放回集合内。
    """
    T = cert.a * problem.A + cert.b * problem.B
    if cert.a > 0.0 and cert.b > 0.0:
        try:
            return extremal_point(problem, cert)
        except NoUnitEigenvalue as e:
            logger.debug(f"[Dominance] falling back to single-form extremizer: {e}")
    if problem.p == 0 or problem.c_is_zero():
        return _extremal(problem, np.zeros(problem.p), T)
    active = problem.B if cert.a <= 0.0 else problem.A
    v = _single_form_direction(problem.C, active)
    peak = max(float(v @ problem.A @ v), float(v @ problem.B @ v))
    if peak <= 0.0:
        return _extremal(problem, np.zeros(problem.p), T)
    return _extremal(problem, v / np.sqrt(peak), T)


# ---------------------------------------------------------------------------
# n > 2 forms


@dataclass(frozen=True, eq=False)
class DiagnosticReport:
    verdict: str  # "Exact" | "NotExact"
    coeffs: np.ndarray
    h: np.ndarray
    form_values: np.ndarray
    inf_value: float
    sup_candidate: float
    deviation: float  # 候选点偏离约束面的最大值，或精修点的相对对偶间隙（取较小者）


def _ternary_min(f: Callable[[float], float], lo: float, hi: float, width: float) -> Tuple[float, float]:
    while hi - lo > width:
        third = (hi - lo) / 3.0
        m1, m2 = lo + third, hi - third
        f1, f2 = f(m1), f(m2)
        if f1 < f2:
            hi = m2
        elif f2 < f1:
            lo = m1
        else:
            lo, hi = m1, m2
    t = 0.5 * (lo + hi)
    return t, f(t)


def _simplex_descent(forms: Sequence[np.ndarray], C: np.ndarray, sweeps: int, tol: float) -> np.ndarray:
    """单纯形上对 lam_max(C, sum w_i A_i) 做两两坐标下降。"""
    n = len(forms)

    def psi(w: np.ndarray) -> float:
        T = sum(wi * Ai for wi, Ai in zip(w, forms))
        try:
            return gen_eig_max(C, T)[0]
        except NotPositiveDefinite:
            return np.inf

    w = np.full(n, 1.0 / n)
    best = psi(w)
    for sweep in range(sweeps):
        before = best
        for i, j in combinations(range(n), 2):
            total = w[i] + w[j]
            if total <= 0.0:
                continue

            def along(t: float, i=i, j=j, total=total) -> float:
                trial = w.copy()
                trial[i], trial[j] = t * total, (1.0 - t) * total
                return psi(trial)

            t, value = _ternary_min(along, 0.0, 1.0, 1e-10)
            for edge in (0.0, 1.0):
                edge_value = along(edge)
                if edge_value < value:
                    t, value = edge, edge_value
            if value < best:
                w[i], w[j] = t * total, (1.0 - t) * total
                best = value
        if not np.isfinite(best):
            raise NotPositiveDefinite("no PD combination found on the simplex")
        if before - best <= tol * (1.0 + best):
            logger.debug(f"[Dominance] simplex descent settled after {sweep + 1} sweeps")
            break
    return best * w


def n_ellipsoid_diagnostic(
    forms: Sequence[np.ndarray],
    C: np.ndarray,
    tol: float = 1e-6,
    coeffs: Optional[Sequence[float]] = None,
    sweeps: int = 50,
) -> DiagnosticReport:
    """
    Exact 当且仅当 (C, sum c_i A_i) 特征值 1 子空间中的候选 h 使所有 c_i > 0 的约束取等，
    或者在 sum c_i A_i >= C 成立时，局部精修得到的可行点把对偶间隙缩小到 tol 以内。
    Exact 证明 sup = inf；NotExact 仅供诊断。
    """
    forms = [sym(as_matrix(F, f"form {i}")) for i, F in enumerate(forms)]
    C = sym(as_matrix(C, "C"))
    if len(forms) < 2:
        raise InputError("diagnostic needs at least two forms")
    if any(F.shape != C.shape for F in forms):
        raise InputError("forms and C must share one dimension")

    if coeffs is None:
        if len(forms) == 2:
            cert = sdominance_solve(DominanceProblem(forms[0], forms[1], C))
            coeffs = [cert.a, cert.b]
        else:
            coeffs = _simplex_descent(forms, C, sweeps, tol * 1e-3)
    c = np.maximum(np.asarray(coeffs, dtype=float), 0.0)
    total = float(c.sum())
    p = C.shape[0]
    if total <= 0.0 or not np.any(C):
        return DiagnosticReport("Exact", c, np.zeros(p), np.zeros(len(forms)), 0.0, 0.0, 0.0)

    T = sum(ci * F for ci, F in zip(c, forms))
    restricted = _restricted_pencil(C, T)
    if restricted is None:
        raise NoUnitEigenvalue("combination is singular where C is not")
    U, Cr, Tr = restricted
    res = gen_eig(Cr, Tr)
    lam = float(res.values[0])
    if abs(lam - 1.0) > tol:
        raise NoUnitEigenvalue(f"top eigenvalue of (C, sum c_i A_i) is {lam:.12g}, expected 1")
    V = U @ res.vectors[:, res.values >= lam - tol * max(1.0, lam)]

    active = c > tol * total
    candidates = [V[:, k] for k in range(V.shape[1])]
    if V.shape[1] > 1:
        for i, j in combinations(np.flatnonzero(active), 2):
            candidates.append(_balanced_combination(V, forms[i] - forms[j]))

    best: Optional[Tuple[float, np.ndarray, np.ndarray]] = None
    for v in candidates:
        t_norm = float(v @ T @ v)
        if t_norm <= 0.0:
            continue
        h = v * np.sqrt(total / t_norm)
        values = np.array([float(h @ F @ h) for F in forms])
        dev = np.where(active, np.abs(values - 1.0), np.maximum(values - 1.0, 0.0))
        if best is None or dev.max() < best[0]:
            best = (float(dev.max()), _orient(h), values)
    if best is None:
        raise NoUnitEigenvalue("no admissible candidate in the unit eigenspace")
    deviation, h, values = best
    if deviation > tol and min_eig(T - C) >= -tol * _scale(C):
        # 系数只近似最优时候选点偏离约束面；改用精修可行点的相对对偶间隙
        x = polish_quadratic_max(forms, C, h / np.sqrt(max(float(values.max()), 1.0)))
        peak = max(float(x @ F @ x) for F in forms)
        if peak > 1.0:
            x = x / np.sqrt(peak)
        # KKT 乘子：sum c_i A_i x = C x, c >= 0
        refined = nnls(np.column_stack([F @ x for F in forms]), C @ x)[0]
        if 0.0 < refined.sum() < total:
            T_refined = sum(ci * F for ci, F in zip(refined, forms))
            if min_eig(T_refined - C) >= -1e-9 * _scale(C):
                c, total = refined, float(refined.sum())
        gap = max((total - float(x @ C @ x)) / (1.0 + total), 0.0)
        if gap < deviation:
            deviation, h, values = gap, _orient(x), np.array([float(x @ F @ x) for F in forms])
    verdict = "Exact" if deviation <= tol else "NotExact"
    logger.info(f"[Dominance] {len(forms)}-ellipsoid diagnostic: {verdict} (deviation {deviation:.3e})")
    return DiagnosticReport(verdict, c, h, values, total, float(h @ C @ h), deviation)


# ---------------------------------------------------------------------------
# S-procedure with two constraints


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """q(x) = x^T M x + const."""

    matrix: np.ndarray
    const: float = 0.0

    def __call__(self, x: np.ndarray) -> float:
        return float(x @ self.matrix @ x) + self.const


@dataclass(frozen=True, eq=False)
class SProcedureResult:
    verdict: str  # "Certified" | "Refuted" | "Inconclusive"
    a1: float = 0.0
    a2: float = 0.0
    witness: Optional[np.ndarray] = None
    matrix_residual: float = 0.0
    const_residual: float = 0.0
    dimension_caveat: bool = False


def _open_interval(d: float, alpha: float, strict: bool) -> Tuple[float, float]:
    """s >= 0 中满足 s*d + alpha < 0（strict）或 <= 0 的区间。"""
    bad = alpha >= 0.0 if strict else alpha > 0.0
    if d > 0.0:
        return (0.0, -alpha / d) if not bad else (0.0, -1.0)
    if d < 0.0:
        return (max(0.0, -alpha / d), np.inf)
    return (0.0, np.inf) if not bad else (0.0, -1.0)


def _trial_directions(mats: Sequence[np.ndarray], rng: np.random.Generator, count: int) -> np.ndarray:
    cols = [sla.eigh(sym(M))[1] for M in mats]
    N = mats[0].shape[0]
    cols.append(rng.standard_normal((N, count)))
    D = np.hstack(cols)
    return D / np.linalg.norm(D, axis=0)


def _strictly_feasible(q1: QuadraticForm, q2: QuadraticForm, rng: np.random.Generator) -> bool:
    if q1.const < 0.0 and q2.const < 0.0:
        return True
    D = _trial_directions([q1.matrix, q2.matrix, q1.matrix + q2.matrix, q1.matrix - q2.matrix], rng, 500)
    for d in D.T:
        lo1, hi1 = _open_interval(float(d @ q1.matrix @ d), q1.const, strict=True)
        lo2, hi2 = _open_interval(float(d @ q2.matrix @ d), q2.const, strict=True)
        if max(lo1, lo2) < min(hi1, hi2):
            return True
    return False


def _has_pd_combination(A1: np.ndarray, A2: np.ndarray, tol: float) -> bool:
    scale = _scale(A1) + _scale(A2)
    for angle in np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False):
        if min_eig(np.cos(angle) * A1 + np.sin(angle) * A2) > tol * scale:
            return True
    return False


def _certificate_margin(q0: QuadraticForm, q1: QuadraticForm, q2: QuadraticForm,
                        a1: float, a2: float) -> Tuple[float, float]:
    mat = min_eig(a1 * q1.matrix + a2 * q2.matrix - q0.matrix)
    const = a1 * q1.const + a2 * q2.const - q0.const
    return mat, const


def _best_on_ray(g: Callable[[float], float]) -> Tuple[float, float]:
    r = 1.0
    for _ in range(80):
        if g(2.0 * r) <= g(r):
            break
        r *= 2.0
    return _ternary_min(lambda t: -g(t), 0.0, 2.0 * r, 1e-13 * r)


def _find_witness(q0: QuadraticForm, q1: QuadraticForm, q2: QuadraticForm,
                  rng: np.random.Generator, tol: float) -> Optional[np.ndarray]:
    N = q0.matrix.shape[0]
    if q1.const <= 0.0 and q2.const <= 0.0 and q0.const > tol:
        return np.zeros(N)
    mats = [q0.matrix, q0.matrix - q1.matrix, q0.matrix - q2.matrix, q0.matrix - q1.matrix - q2.matrix]
    best_value, best_x = tol, None
    for d in _trial_directions(mats, rng, 2000).T:
        d0 = float(d @ q0.matrix @ d)
        lo1, hi1 = _open_interval(float(d @ q1.matrix @ d), q1.const, strict=False)
        lo2, hi2 = _open_interval(float(d @ q2.matrix @ d), q2.const, strict=False)
        lo, hi = max(lo1, lo2), min(hi1, hi2)
        if lo > hi:
            continue
        if np.isinf(hi):
            s = max(lo, (abs(q0.const) + 1.0) / d0) if d0 > 0.0 else lo
        else:
            s = hi if d0 > 0.0 else lo
        value = s * d0 + q0.const
        if value > best_value:
            best_value, best_x = value, np.sqrt(s) * d
    return best_x


def sprocedure_certify(q0: QuadraticForm, q1: QuadraticForm, q2: QuadraticForm,
                       tol: float = DEFAULT_TOL, seed: int = 0) -> SProcedureResult:
    """
    要么给出乘子 a1, a2 >= 0 使 q0 <= a1 q1 + a2 q2 处处成立，
    要么给出满足 q1(x) <= 0, q2(x) <= 0 且 q0(x) > 0 的点 x。
    """
    mats = [sym(as_matrix(q.matrix, f"q{i}")) for i, q in enumerate((q0, q1, q2))]
    if not (mats[0].shape == mats[1].shape == mats[2].shape) or mats[0].shape[0] != mats[0].shape[1]:
        raise InputError("quadratic forms must be square and of one dimension")
    q0, q1, q2 = (QuadraticForm(M, float(q.const)) for M, q in zip(mats, (q0, q1, q2)))
    N = mats[0].shape[0]
    caveat = N < 3
    if caveat:
        logger.warning(f"[Dominance] S-procedure exactness needs dimension >= 3 (got {N}); cross-check the result")

    rng = np.random.default_rng(seed)
    if not _has_pd_combination(q1.matrix, q2.matrix, tol):
        raise PremiseViolated("no combination b1*A1 + b2*A2 is positive definite")
    if not _strictly_feasible(q1, q2, rng):
        raise PremiseViolated("no strictly feasible point for q1 < 0, q2 < 0")

    def g_at(angle: float) -> Callable[[float], float]:
        c, s = np.cos(angle), np.sin(angle)
        return lambda r: min(*_certificate_margin(q0, q1, q2, r * c, r * s))

    def best_for(angle: float) -> Tuple[float, float]:
        r, neg = _best_on_ray(g_at(angle))
        return r, -neg

    grid = np.linspace(0.0, 0.5 * np.pi, 91)
    scores = [best_for(angle)[1] for angle in grid]
    k = int(np.argmax(scores))
    angle = float(grid[k])
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    refined, _ = _ternary_min(lambda t: -best_for(t)[1], lo, hi, 1e-10)
    if best_for(refined)[1] > scores[k]:
        angle = refined
    r, score = best_for(angle)
    a1 = max(0.0, r * float(np.cos(angle)))
    a2 = max(0.0, r * float(np.sin(angle)))
    if a1 < 1e-15 * r:
        a1 = 0.0
    if a2 < 1e-15 * r:
        a2 = 0.0

    scale = 1.0 + _scale(q0.matrix) + abs(q0.const)
    if score >= -tol * scale:
        mat, const = _certificate_margin(q0, q1, q2, a1, a2)
        logger.info(f"[Dominance] S-procedure certificate a1={a1:.12g}, a2={a2:.12g}")
        return SProcedureResult("Certified", a1, a2, None, mat, const, caveat)

    witness = _find_witness(q0, q1, q2, rng, tol * scale)
    if witness is not None:
        logger.info("[Dominance] S-procedure refuted by a feasible witness")
        return SProcedureResult("Refuted", witness=witness, dimension_caveat=caveat)
    logger.warning("[Dominance] S-procedure inconclusive: no certificate and no witness found")
    return SProcedureResult("Inconclusive", dimension_caveat=caveat)
