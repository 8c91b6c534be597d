"""
各场景归约到标准的双椭球问题。

每个场景编译成普通的 ProblemSpec（在扩展空间上，观测误差并入未知量），
并保留生成其原生恢复映射的 builder。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Optional, Tuple

import numpy as np

from src.core.dominance import DominanceProblem, ParamCertificate
from src.core.errors import DegenerateModel, InputError, NotPositiveDefinite, SingularRegularizer, Unbounded
from src.core.linalg import as_matrix, gram, orthonormal_nullspace, solve_spd
from src.core.recovery import (
    ZERO_RADIUS,
    ProblemSpec,
    RecoveryMap,
    Scenario,
    constrained_lsq,
    lexicographic_lsq,
    solve_radius,
)
from src.core.settings import DEFAULT_TOL

logger = logging.getLogger(__name__)

MapBuilder = Callable[[float, float], RecoveryMap]


@dataclass(frozen=True, eq=False)
class TwoSpaceSpec:
    """模型 {dist(f, span V) <= epsilon, dist(f, span W) <= eta}。"""

    V: np.ndarray
    W: np.ndarray
    epsilon: float
    eta: float
    Lambda: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        Lambda = as_matrix(self.Lambda, "Lambda")
        n = Lambda.shape[1]
        object.__setattr__(self, "Lambda", Lambda)
        object.__setattr__(self, "Q", as_matrix(self.Q, "Q", cols=n))
        for name in ("V", "W"):
            M = np.asarray(getattr(self, name), dtype=float).reshape(n, -1)
            if np.max(np.abs(M.T @ M - np.eye(M.shape[1])), initial=0.0) > 1e-10:
                raise InputError(f"columns of {name} are not orthonormal")
            object.__setattr__(self, name, M)
        if not (self.epsilon > 0 and self.eta > 0):
            raise InputError("approximability levels must be positive")


@dataclass(frozen=True, eq=False)
class ExtendedSpec:
    """扩展空间上的问题及投影 f~ -> f。"""

    spec: ProblemSpec
    project: np.ndarray
    native_dim: int

    def native(self, f_ext: np.ndarray) -> np.ndarray:
        return self.project @ f_ext


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    radius_sq: float
    a: float
    b: float
    c: float
    d: float
    params: ParamCertificate
    map: RecoveryMap
    extended: Optional[ExtendedSpec] = None
    extremal: Optional[np.ndarray] = None


def _projector_complement(V: np.ndarray) -> np.ndarray:
    return np.eye(V.shape[0]) - V @ V.T


def two_space_problem(ts: TwoSpaceSpec) -> Tuple[ProblemSpec, Callable[[float, float], Tuple[float, float]]]:
    """R = P_{V-perp} / epsilon, S = P_{W-perp} / eta; (a, b) -> (a/eps^2, b/eta^2)."""
    R = _projector_complement(ts.V) / ts.epsilon
    S = _projector_complement(ts.W) / ts.eta
    if orthonormal_nullspace(np.vstack([R, S, ts.Lambda])).shape[1]:
        raise DegenerateModel("span V ∩ span W ∩ ker Lambda is nontrivial; model set is unbounded")
    spec = ProblemSpec(ts.Lambda, ts.Q, R, S, ts.epsilon, ts.eta, Scenario.TWO_SPACE)

    def back_map(a: float, b: float) -> Tuple[float, float]:
        return a / ts.epsilon ** 2, b / ts.eta ** 2

    return spec, back_map


def solve_two_space(ts: TwoSpaceSpec, tol: float = DEFAULT_TOL) -> ScenarioResult:
    spec, back_map = two_space_problem(ts)
    cert = solve_radius(spec, tol)
    c, d = back_map(cert.params.a, cert.params.b)
    # 两种权重给出同一个映射
    native = RecoveryMap(cert.map.D, cert.map.QD, c, d, cert.map.limit_case)
    logger.info(f"[Scenario] two-space radius^2 = {cert.radius_sq:.12g} (c={c:.6g}, d={d:.6g})")
    return ScenarioResult(cert.radius_sq, cert.params.a, cert.params.b, c, d, cert.params, native,
                          extremal=cert.extremal)


# ---------------------------------------------------------------------------
# l2-inaccurate data: y = Lambda f + e, ||S e|| <= eta


def _require(spec: ProblemSpec, scenario: Scenario) -> None:
    if spec.scenario != scenario:
        raise InputError(f"expected a {scenario.value} spec, got {spec.scenario.value}")


def l2_native_map(spec: ProblemSpec, c: float, d: float) -> RecoveryMap:
    """
    y -> argmin c||Rf||^2 + d||S(y - Lambda f)||^2，即
    (c R^T R + d Lambda^T S^T S Lambda)^{-1} d Lambda^T S^T S；c = 0 或 d = 0
    时取字典序极限。
    """
    SL = spec.S @ spec.Lambda
    zeros_r = np.zeros((spec.R.shape[0], spec.m))
    no_rows, no_rhs = np.zeros((0, spec.n)), np.zeros((0, spec.m))
    if c > 0 and d > 0:
        try:
            D = solve_spd(c * gram(spec.R) + d * gram(SL), d * SL.T @ spec.S)
        except NotPositiveDefinite as e:
            raise SingularRegularizer(f"ker R ∩ ker S Lambda is nontrivial: {e}") from e
        case = "none"
    elif c > 0:
        D = lexicographic_lsq(spec.R, zeros_r, SL, spec.S, no_rows, no_rhs)
        case = "d=0"
    elif d > 0:
        D = lexicographic_lsq(SL, spec.S, spec.R, zeros_r, no_rows, no_rhs)
        case = "c=0"
    else:
        raise SingularRegularizer("c = d = 0")
    D = np.asarray(D).reshape(spec.n, spec.m)
    return RecoveryMap(D=D, QD=spec.Q @ D, a=c, b=d, limit_case=case)


def l2_inaccurate_problem(spec: ProblemSpec) -> Tuple[ExtendedSpec, MapBuilder]:
    """
    扩展空间 R^n x R^m：Lambda~ = [Lambda | I]，Q~ = [Q | 0]，
    R~ = [R/eps | 0]，S~ = [0 | S/eta]。
    """
    _require(spec, Scenario.L2)
    n, m = spec.n, spec.m
    ext = ProblemSpec(
        Lambda=np.hstack([spec.Lambda, np.eye(m)]),
        Q=np.hstack([spec.Q, np.zeros((spec.Q.shape[0], m))]),
        R=np.hstack([spec.R / spec.epsilon, np.zeros((spec.R.shape[0], m))]),
        S=np.hstack([np.zeros((spec.S.shape[0], n)), spec.S / spec.eta]),
    )
    ext.validate()
    project = np.hstack([np.eye(n), np.zeros((n, m))])
    return ExtendedSpec(ext, project, n), partial(l2_native_map, spec)


def l2_native_problem(spec: ProblemSpec) -> DominanceProblem:
    """在整个 R^n 上 c R^T R + d Lambda^T S^T S Lambda >= Q^T Q，变量 (a, b) = (c eps^2, d eta^2)。"""
    _require(spec, Scenario.L2)
    return DominanceProblem.from_forms(
        gram(spec.R / spec.epsilon),
        gram(spec.S @ spec.Lambda / spec.eta),
        gram(spec.Q),
        labels=("R", "S Lambda", "Q"),
        on_kernel=Unbounded,
    )


def _solve_extended(ext: ExtendedSpec, builder: MapBuilder, spec: ProblemSpec, tol: float,
                    label: str) -> ScenarioResult:
    cert = solve_radius(ext.spec, tol)
    a, b = cert.params.a, cert.params.b
    c, d = a / spec.epsilon ** 2, b / spec.eta ** 2
    if c == 0.0 and d == 0.0:
        # 半径为 0：任意正权重给出同一个 QD
        native = replace(builder(1.0, 1.0), a=0.0, b=0.0, limit_case=ZERO_RADIUS)
    else:
        native = builder(c, d)
    extremal = None if cert.extremal is None else ext.native(cert.extremal)
    logger.info(f"[Scenario] {label} radius^2 = {cert.radius_sq:.12g} (c={c:.6g}, d={d:.6g})")
    return ScenarioResult(cert.radius_sq, a, b, c, d, cert.params, native, ext, extremal)


def solve_l2_inaccurate(spec: ProblemSpec, tol: float = DEFAULT_TOL) -> ScenarioResult:
    ext, builder = l2_inaccurate_problem(spec)
    return _solve_extended(ext, builder, spec, tol, "l2")


# ---------------------------------------------------------------------------
# mixed data: S' e = 0 exactly, ||S'' e|| <= eta


def split_observations(Lambda1: np.ndarray, Lambda2: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lambda = [Lambda'; Lambda'']，选择矩阵 S' = [I 0]，S'' = [0 I]。"""
    Lambda1 = as_matrix(Lambda1, "Lambda'")
    Lambda2 = as_matrix(Lambda2, "Lambda''", cols=Lambda1.shape[1])
    m1, m2 = Lambda1.shape[0], Lambda2.shape[0]
    S1 = np.hstack([np.eye(m1), np.zeros((m1, m2))])
    S2 = np.hstack([np.zeros((m2, m1)), np.eye(m2)])
    return np.vstack([Lambda1, Lambda2]), S1, S2


def _mixed_parts(spec: ProblemSpec) -> Tuple[np.ndarray, np.ndarray]:
    _require(spec, Scenario.MIXED)
    if spec.S_prime is None or spec.S_double is None:
        raise InputError("mixed scenario needs S_prime and S_double")
    return spec.S_prime, spec.S_double


def mixed_native_map(spec: ProblemSpec, c: float, d: float) -> RecoveryMap:
    """y -> argmin c||Rf||^2 + d||S''(y - Lambda f)||^2 s.t. S' Lambda f = S' y."""
    S1, S2 = _mixed_parts(spec)
    B = S1 @ spec.Lambda
    S2L = S2 @ spec.Lambda
    zeros_r = np.zeros((spec.R.shape[0], spec.m))
    if c > 0 and d > 0:
        A = np.vstack([np.sqrt(c) * spec.R, np.sqrt(d) * S2L])
        a = np.vstack([zeros_r, np.sqrt(d) * S2])
        D, case = constrained_lsq(A, a, B, S1), "none"
    elif c > 0:
        D, case = lexicographic_lsq(spec.R, zeros_r, S2L, S2, B, S1), "d=0"
    elif d > 0:
        D, case = lexicographic_lsq(S2L, S2, spec.R, zeros_r, B, S1), "c=0"
    else:
        raise SingularRegularizer("c = d = 0")
    D = np.asarray(D).reshape(spec.n, spec.m)
    return RecoveryMap(D=D, QD=spec.Q @ D, a=c, b=d, limit_case=case)


def mixed_problem(spec: ProblemSpec) -> Tuple[ExtendedSpec, MapBuilder]:
    """
    扩展空间 R^n x ker S'（基 K'）：Lambda~ = [Lambda | K']，
    R~ = [R/eps | 0]，S~ = [0 | S'' K'/eta]。
    """
    S1, S2 = _mixed_parts(spec)
    n = spec.n
    K = orthonormal_nullspace(S1)
    k = K.shape[1]
    ext = ProblemSpec(
        Lambda=np.hstack([spec.Lambda, K]),
        Q=np.hstack([spec.Q, np.zeros((spec.Q.shape[0], k))]),
        R=np.hstack([spec.R / spec.epsilon, np.zeros((spec.R.shape[0], k))]),
        S=np.hstack([np.zeros((S2.shape[0], n)), S2 @ K / spec.eta]),
    )
    ext.validate()
    project = np.hstack([np.eye(n), np.zeros((n, k))])
    return ExtendedSpec(ext, project, n), partial(mixed_native_map, spec)


def mixed_native_problem(spec: ProblemSpec) -> DominanceProblem:
    """在 ker(S' Lambda) 上 c||Rf||^2 + d||S'' Lambda f||^2 >= ||Qf||^2。"""
    S1, S2 = _mixed_parts(spec)
    Z = orthonormal_nullspace(S1 @ spec.Lambda)
    return DominanceProblem.from_forms(
        gram(spec.R @ Z / spec.epsilon),
        gram(S2 @ spec.Lambda @ Z / spec.eta),
        gram(spec.Q @ Z),
        labels=("R", "S'' Lambda", "Q"),
        basis=Z,
        on_kernel=Unbounded,
    )


def solve_mixed(spec: ProblemSpec, tol: float = DEFAULT_TOL) -> ScenarioResult:
    ext, builder = mixed_problem(spec)
    return _solve_extended(ext, builder, spec, tol, "mixed")
