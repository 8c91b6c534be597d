"""
稠密线性代数内核。

基于 SVD 的零空间/值域正交基、行满秩伪逆、对称及广义对称特征问题（Cholesky
约化）、SPD 求解，以及二次型极大值的约束局部精修。所有函数都只依赖输入。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from src.core.errors import InputError, NotPositiveDefinite, RankDeficient
from src.core.settings import NULLSPACE_TOL, PINV_COND_TOL

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SymEigResult:
    """Eigenpairs sorted by descending eigenvalue (columns of ``vectors``)."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def top(self) -> Tuple[float, np.ndarray]:
        return float(self.values[0]), self.vectors[:, 0]


def as_matrix(value, name: str = "matrix", cols: Optional[int] = None) -> np.ndarray:
    """转为有限值的二维浮点数组；一维输入视为一行。"""
    arr = np.array(value, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else np.zeros((0, cols or 0))
    if arr.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    if cols is not None and arr.shape[1] != cols:
        raise InputError(f"{name} must have {cols} columns, got {arr.shape[1]}")
    return arr


def sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def gram(M: np.ndarray) -> np.ndarray:
    return sym(M.T @ M)


def _svd(M: np.ndarray):
    return sla.svd(M, full_matrices=True, lapack_driver="gesvd")


def numerical_rank(M: np.ndarray, tol: float = NULLSPACE_TOL) -> int:
    if M.size == 0:
        return 0
    s = sla.svdvals(M)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def orthonormal_nullspace(M: np.ndarray, tol: float = NULLSPACE_TOL) -> np.ndarray:
    """
    {x : Mx = 0} 的正交基（按列）。

    小于 tol * sigma_max 的奇异值视为 0；M 单射时返回零列矩阵。
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    cols = M.shape[1]
    if M.shape[0] == 0 or cols == 0:
        return np.eye(cols)
    _, s, vh = _svd(M)
    rank = 0 if s.size == 0 or s[0] == 0.0 else int(np.sum(s > tol * s[0]))
    return vh[rank:].T.copy()


def orthonormal_range(M: np.ndarray, tol: float = NULLSPACE_TOL) -> np.ndarray:
    """M 列空间的正交基。"""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    u, s, _ = _svd(M)
    rank = 0 if s[0] == 0.0 else int(np.sum(s > tol * s[0]))
    return u[:, :rank].copy()


def svd_pinv_nullspace(M: np.ndarray, tol: float = NULLSPACE_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """一次 SVD 同时得到 Moore-Penrose 逆与核的正交基（任意秩）。"""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    if rows == 0 or cols == 0:
        return np.zeros((cols, rows)), np.eye(cols)
    u, s, vh = _svd(M)
    rank = 0 if s[0] == 0.0 else int(np.sum(s > tol * s[0]))
    pinv = (vh[:rank].T / s[:rank]) @ u[:, :rank].T
    return pinv, vh[rank:].T.copy()


def pseudo_inverse(M: np.ndarray, tol: float = PINV_COND_TOL) -> np.ndarray:
    """
    行满秩 M 的右逆 M^T (M M^T)^{-1}，经 SVD 计算。

    最小奇异值低于 tol * sigma_max（观测映射非满射）时抛出 RankDeficient。
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    if rows == 0:
        return np.zeros((cols, 0))
    if rows > cols:
        raise RankDeficient(f"{rows}x{cols} matrix cannot have full row rank")
    u, s, vh = sla.svd(M, full_matrices=False, lapack_driver="gesvd")
    if s[0] == 0.0 or s[-1] <= tol * s[0]:
        cond = np.inf if s[-1] == 0.0 else s[0] / s[-1]
        raise RankDeficient(f"matrix is numerically rank deficient (condition {cond:.3e})")
    return (vh.T / s) @ u.T


def min_eig(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(sla.eigvalsh(sym(A))[0])


def _cholesky(T: np.ndarray) -> np.ndarray:
    try:
        return sla.cholesky(sym(T), lower=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {e}") from e


def gen_eig(C: np.ndarray, T: np.ndarray) -> SymEigResult:
    """
    C v = lam T v 的全部特征对，降序，v^T T v = 1。

    T = L L^T 后转为 L^{-1} C L^{-T} 的标准对称问题。
    """
    if C.shape != T.shape or C.shape[0] != C.shape[1]:
        raise InputError(f"pencil shapes differ: {C.shape} vs {T.shape}")
    p = C.shape[0]
    if p == 0:
        return SymEigResult(values=np.zeros(0), vectors=np.zeros((0, 0)))
    L = _cholesky(T)
    Y = sla.solve_triangular(L, sym(C), lower=True)
    K = sla.solve_triangular(L, Y.T, lower=True)
    w, V = sla.eigh(sym(K))
    vectors = sla.solve_triangular(L.T, V, lower=False)
    return SymEigResult(values=w[::-1].copy(), vectors=vectors[:, ::-1].copy())


def gen_eig_max(C: np.ndarray, T: np.ndarray) -> Tuple[float, np.ndarray]:
    """Largest generalized eigenvalue of (C, T) and its T-normalized vector."""
    if C.shape[0] == 0:
        return 0.0, np.zeros(0)
    return gen_eig(C, T).top


def solve_spd(T: np.ndarray, B: np.ndarray) -> np.ndarray:
    """对称正定 T 求解 T X = B。"""
    T = np.asarray(T, dtype=float)
    if T.shape[0] == 0:
        return np.zeros_like(np.asarray(B, dtype=float))
    try:
        factor = sla.cho_factor(sym(T), lower=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NotPositiveDefinite(f"matrix is not positive definite: {e}") from e
    return sla.cho_solve(factor, np.asarray(B, dtype=float))


def polish_quadratic_max(forms: Sequence[np.ndarray], C: np.ndarray, x0: np.ndarray,
                         maxiter: int = 200) -> np.ndarray:
    """
    SLSQP 局部精修：max x^T C x s.t. x^T A_i x <= 1，从 x0 出发。
    只保证局部最优；结果非有限时原样返回 x0。
    """
    constraints = [
        {"type": "ineq", "fun": lambda x, A=A: 1.0 - x @ A @ x, "jac": lambda x, A=A: -2.0 * (A @ x)}
        for A in forms
    ]
    res = minimize(
        lambda x: -(x @ C @ x),
        np.asarray(x0, dtype=float),
        jac=lambda x: -2.0 * (C @ x),
        method="SLSQP",
        constraints=constraints,
        options={"maxiter": maxiter, "ftol": 1e-15},
    )
    return res.x if np.all(np.isfinite(res.x)) else x0
