"""
双椭球模型下的最优恢复：由原始算子构造问题、求信息半径、生成约束正则化恢复映射。

模型集合为 {f : ||R f|| <= 1, ||S f|| <= 1}，观测 y = Lambda f，目标量为 Q f。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from src.core.dominance import (
    DominanceProblem,
    ParamCertificate,
    extremizer,
    sdominance_solve,
)
from src.core.errors import (
    IllPosed,
    InfeasibleConstraint,
    InputError,
    NotPositiveDefinite,
    RecoveryError,
    SingularRegularizer,
    Unbounded,
)
from src.core.linalg import (
    as_matrix,
    gram,
    orthonormal_nullspace,
    pseudo_inverse,
    solve_spd,
    svd_pinv_nullspace,
)
from src.core.settings import DEFAULT_TOL, NULLSPACE_TOL

logger = logging.getLogger(__name__)

# Q 在 ker Lambda 上为零时返回映射的 limit_case 标记
ZERO_RADIUS = "zero-radius"


class Scenario(str, Enum):
    EXACT = "exact"
    TWO_SPACE = "two-space"
    L2 = "l2"
    MIXED = "mixed"
    L1 = "l1"


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """
    一个恢复问题。R、Q 作用在 R^n 上；精确数据与双子空间场景中 S 也作用在 R^n，
    l2 场景中 S 作用在数据空间 R^m（混合数据的拆分由 ``S_prime``、``S_double``
    给出）。S 可以没有行。
    """

    Lambda: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    epsilon: float = 1.0
    eta: float = 1.0
    scenario: Scenario = Scenario.EXACT
    S_prime: Optional[np.ndarray] = None
    S_double: Optional[np.ndarray] = None

    def __post_init__(self):
        Lambda = as_matrix(self.Lambda, "Lambda")
        n = Lambda.shape[1]
        m = Lambda.shape[0]
        s_cols = m if self.scenario in (Scenario.L2, Scenario.MIXED) else n
        object.__setattr__(self, "Lambda", Lambda)
        object.__setattr__(self, "Q", as_matrix(self.Q, "Q", cols=n))
        object.__setattr__(self, "R", as_matrix(self.R, "R", cols=n))
        object.__setattr__(self, "S", as_matrix(self.S, "S", cols=s_cols))
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        for name in ("S_prime", "S_double"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, as_matrix(value, name, cols=m))
        if not (self.epsilon > 0 and self.eta > 0):
            raise InputError(f"levels must be positive (epsilon={self.epsilon}, eta={self.eta})")
        if n == 0:
            raise InputError("ambient dimension must be positive")

    @property
    def n(self) -> int:
        return self.Lambda.shape[1]

    @property
    def m(self) -> int:
        return self.Lambda.shape[0]

    @cached_property
    def nullspace(self) -> np.ndarray:
        return orthonormal_nullspace(self.Lambda)

    @cached_property
    def lambda_pinv(self) -> np.ndarray:
        return pseudo_inverse(self.Lambda)

    def validate(self) -> None:
        """Lambda 满射，且 ker R ∩ ker S ∩ ker Lambda = {0}。"""
        _ = self.lambda_pinv
        native_s = self.scenario in (Scenario.EXACT, Scenario.TWO_SPACE)
        S_part = self.S if native_s else np.zeros((0, self.n))
        stacked = np.vstack([self.R, S_part, self.Lambda])
        if orthonormal_nullspace(stacked).shape[1]:
            raise Unbounded("ker R ∩ ker S ∩ ker Lambda is nontrivial; worst-case error is infinite")


@dataclass(frozen=True, eq=False)
class RecoveryMap:
    D: np.ndarray
    QD: np.ndarray
    a: float
    b: float
    limit_case: str = "none"

    def apply(self, y) -> Tuple[np.ndarray, np.ndarray]:
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != self.D.shape[1]:
            raise InputError(f"observation has length {y.size}, expected {self.D.shape[1]}")
        return self.D @ y, self.QD @ y


@dataclass(frozen=True, eq=False)
class RadiusCertificate:
    radius_sq: float
    params: ParamCertificate
    map: RecoveryMap
    oracle_lb: Optional[float] = None
    extremal: Optional[np.ndarray] = None


def restrict_grams(spec: ProblemSpec) -> DominanceProblem:
    """R、S、Q 限制到 ker Lambda（正交基 N）上的 Gram 矩阵。"""
    spec.validate()
    N = spec.nullspace
    RN, SN, QN = spec.R @ N, spec.S @ N, spec.Q @ N
    return DominanceProblem(gram(RN), gram(SN), gram(QN), labels=("R_N", "S_N", "Q_N"), basis=N)


def solve_radius(spec: ProblemSpec, tol: float = DEFAULT_TOL) -> RadiusCertificate:
    problem = restrict_grams(spec)
    cert = sdominance_solve(problem, tol)
    if problem.p and cert.a == 0.0 and cert.b == 0.0:
        rmap = zero_radius_map(spec)
    else:
        rmap = regularization_map(spec, cert.a, cert.b)
    extremal = None
    if problem.p and not problem.c_is_zero():
        try:
            extremal = problem.to_caller(extremizer(problem, cert).h)
        except RecoveryError as e:
            logger.debug(f"[Recovery] no extremal point: {e}")
    logger.info(f"[Recovery] radius^2 = {cert.a + cert.b:.12g} (a={cert.a:.6g}, b={cert.b:.6g}, p={problem.p})")
    return RadiusCertificate(radius_sq=cert.a + cert.b, params=cert, map=rmap, extremal=extremal)


def multi_regularization_map(
    Lambda: np.ndarray,
    forms: Sequence[Tuple[float, np.ndarray]],
    N: Optional[np.ndarray] = None,
    pinv: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Matrix of y -> argmin sum c_i ||R_i f||^2 s.t. Lambda f = y (all c_i > 0):
    D = pinv - N T^{-1} (sum c_i (R_i N)^T R_i) pinv, T = sum c_i (R_i N)^T (R_i N).
    """
    N = orthonormal_nullspace(Lambda) if N is None else N
    pinv = pseudo_inverse(Lambda) if pinv is None else pinv
    if N.shape[1] == 0:
        return pinv
    T = np.zeros((N.shape[1], N.shape[1]))
    rhs = np.zeros((N.shape[1], Lambda.shape[0]))
    for c, R in forms:
        RN = R @ N
        T += c * gram(RN)
        rhs += c * (RN.T @ R) @ pinv
    try:
        return pinv - N @ solve_spd(T, rhs)
    except NotPositiveDefinite as e:
        raise SingularRegularizer(f"regularizer is singular on ker Lambda: {e}") from e


def _as_columns(v: np.ndarray, rows: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v.reshape(rows, -1) if v.size or rows else np.zeros((0, 1))


def constrained_lsq(A, a_vec, B, b_vec, tol: float = NULLSPACE_TOL) -> np.ndarray:
    """
    在 B x = b 约束下极小化 ||A x - a||^2：

        x = xbar - K (K^T A^T A K)^{-1} K^T A^T (A xbar - a),   xbar = B^+ b,

    K 为 ker B 的正交基。右端可以是矩阵（每列一个问题）。
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    B = np.asarray(B, dtype=float).reshape(-1, n)
    vector = np.asarray(a_vec).ndim == 1 and np.asarray(b_vec).ndim <= 1
    a2 = _as_columns(a_vec, A.shape[0])
    b2 = _as_columns(b_vec, B.shape[0])
    cols = max(a2.shape[1], b2.shape[1])
    if a2.shape[1] == 1 and cols > 1:
        a2 = np.repeat(a2, cols, axis=1)
    if b2.shape[1] == 1 and cols > 1:
        b2 = np.repeat(b2, cols, axis=1)

    if B.shape[0]:
        B_pinv, K = svd_pinv_nullspace(B, tol)
        x_bar = B_pinv @ b2
        gap = np.linalg.norm(B @ x_bar - b2)
        if gap > 1e-8 * (1.0 + np.linalg.norm(b2)):
            raise InfeasibleConstraint(f"right-hand side is not in range(B) (residual {gap:.3e})")
    else:
        x_bar, K = np.zeros((n, cols)), np.eye(n)

    x = x_bar
    if K.shape[1]:
        AK = A @ K
        s = sla.svdvals(AK) if AK.size else np.zeros(0)
        a_norm = float(sla.svdvals(A)[0]) if A.size else 0.0
        if s.size < K.shape[1] or a_norm == 0.0 or s[-1] <= tol * a_norm:
            raise IllPosed("objective is not injective on the constraint kernel")
        z = solve_spd(gram(AK), AK.T @ (A @ x_bar - a2))
        x = x_bar - K @ z
    return x[:, 0] if vector and x.shape[1] == 1 else x


def lexicographic_lsq(A1, a1, A2, a2, B, b, tol: float = NULLSPACE_TOL) -> np.ndarray:
    """
    字典序最小二乘：在 ||A1 x - a1||^2（s.t. B x = b）的极小点中再极小化 ||A2 x - a2||^2。

    第一层极小点集为 {B x = b, K^T A1^T (A1 x - a1) = 0}，K = ker B。
    """
    A1 = np.atleast_2d(np.asarray(A1, dtype=float))
    n = A1.shape[1]
    B = np.asarray(B, dtype=float).reshape(-1, n)
    a1c = _as_columns(a1, A1.shape[0])
    bc = _as_columns(b, B.shape[0])
    K = svd_pinv_nullspace(B, tol)[1] if B.shape[0] else np.eye(n)
    G = K.T @ A1.T
    cols = max(a1c.shape[1], bc.shape[1])
    if a1c.shape[1] == 1 and cols > 1:
        a1c = np.repeat(a1c, cols, axis=1)
    if bc.shape[1] == 1 and cols > 1:
        bc = np.repeat(bc, cols, axis=1)
    stacked_B = np.vstack([B, G @ A1])
    stacked_b = np.vstack([bc, G @ a1c])
    return constrained_lsq(A2, a2, stacked_B, stacked_b, tol)


def regularization_map(spec: ProblemSpec, a: float, b: float) -> RecoveryMap:
    """
    y -> argmin a||Rf||^2 + b||Sf||^2 s.t. Lambda f = y 的矩阵。

    a = 0 或 b = 0 时为极限映射：先极小化剩下的半范数，再在其极小点中极小化另一个。
    """
    if a < 0 or b < 0:
        raise InputError(f"regularization weights must be nonnegative (a={a}, b={b})")
    spec.validate()
    N, pinv, m = spec.nullspace, spec.lambda_pinv, spec.m
    zeros = lambda M: np.zeros((M.shape[0], m))  # noqa: E731
    if N.shape[1] == 0:
        D, case = pinv, "exact-data"
    elif a > 0 and b > 0:
        D, case = multi_regularization_map(spec.Lambda, [(a, spec.R), (b, spec.S)], N, pinv), "none"
    elif a > 0:
        D = lexicographic_lsq(spec.R, zeros(spec.R), spec.S, zeros(spec.S), spec.Lambda, np.eye(m))
        case = "b=0"
    elif b > 0:
        D = lexicographic_lsq(spec.S, zeros(spec.S), spec.R, zeros(spec.R), spec.Lambda, np.eye(m))
        case = "a=0"
    else:
        raise SingularRegularizer("a = b = 0 leaves the regularizer undefined on ker Lambda")
    D = np.asarray(D).reshape(spec.n, m)
    gap = float(np.max(np.abs(spec.Lambda @ D - np.eye(m)), initial=0.0))
    if gap > 1e-8:
        logger.warning(f"[Recovery] interpolation residual {gap:.3e} for (a={a:.6g}, b={b:.6g})")
    return RecoveryMap(D=D, QD=spec.Q @ D, a=a, b=b, limit_case=case)


def zero_radius_map(spec: ProblemSpec) -> RecoveryMap:
    """Q 在 ker Lambda 上为零时半径为 0，任何插值映射给出同一个 QD，取 a = b = 1 的正则化映射。"""
    return replace(regularization_map(spec, 1.0, 1.0), a=0.0, b=0.0, limit_case=ZERO_RADIUS)


def worst_case_dual(M: np.ndarray, R: np.ndarray, S: np.ndarray,
                    tol: float = DEFAULT_TOL) -> Tuple[float, ParamCertificate, DominanceProblem]:
    """sup of ||M f||^2 over {||R f|| <= 1, ||S f|| <= 1} as a full-space dominance solve."""
    problem = DominanceProblem.from_forms(gram(R), gram(S), gram(M), labels=("R", "S", "M"), on_kernel=Unbounded)
    cert = sdominance_solve(problem, tol)
    return cert.a + cert.b, cert, problem


@dataclass(frozen=True)
class DualValue:
    """对偶求得的最坏误差；维数 < 3 时 S-procedure 可能不紧，dimension_caveat 置位，需由 oracle 复核。"""
    value: float
    dimension_caveat: bool = False

    def __float__(self) -> float:
        return self.value


def worst_case_error_dual(M: np.ndarray, spec: ProblemSpec, tol: float = DEFAULT_TOL) -> DualValue:
    M = as_matrix(M, "M", cols=spec.n)
    caveat = spec.n < 3
    if caveat:
        logger.warning(f"[Recovery] dimension {spec.n} < 3: dual value may not be tight, cross-check with the oracle")
    return DualValue(worst_case_dual(M, spec.R, spec.S, tol)[0], caveat)


def key_inequality_slack(
    Q: np.ndarray,
    N: np.ndarray,
    forms: Sequence[Tuple[float, np.ndarray]],
    fs: Sequence[np.ndarray],
) -> float:
    """
    sum c_i ||R_i f_i||^2 - ||Q N T^{-1} sum c_i (R_i N)^T R_i f_i||^2 with
    T = sum c_i (R_i N)^T (R_i N); nonnegative when T dominates (QN)^T (QN).
    """
    T = sum(c * gram(R @ N) for c, R in forms)
    v = sum(c * (R @ N).T @ (R @ f) for (c, R), f in zip(forms, fs))
    lhs = float(np.linalg.norm(Q @ N @ solve_spd(T, v)) ** 2)
    rhs = float(sum(c * np.linalg.norm(R @ f) ** 2 for (c, R), f in zip(forms, fs)))
    return rhs - lhs
