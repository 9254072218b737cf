"""Dense least squares for the small collocation systems.

The first-kind system always has an all-zero first row (the integral over
[a, a] vanishes), so the solve goes through a rank-revealing Householder QR
with column pivoting followed by a complete orthogonal decomposition, which
yields the minimum-norm least-squares solution. Matrices are plain C-ordered
(row-major) float64 numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_RANK_TOL = 1e-12


def as_dense_matrix(m) -> np.ndarray:
    arr = np.array(m, dtype=np.float64, order="C", ndmin=2)
    if arr.ndim != 2 or arr.size == 0:
        raise ValidationError(f"expected a non-empty 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix has non-finite entries")
    return arr


def _householder_qr(a: np.ndarray, pivot: bool):
    """In-place Householder QR of ``a``; returns (R, reflectors, perm)."""
    rows, cols = a.shape
    perm = np.arange(cols)
    reflectors = []
    for k in range(min(rows, cols)):
        if pivot:
            norms = np.sqrt(np.sum(a[k:, k:] ** 2, axis=0))
            p = k + int(np.argmax(norms))
            if p != k:
                a[:, [k, p]] = a[:, [p, k]]
                perm[[k, p]] = perm[[p, k]]

        x = a[k:, k]
        normx = math.sqrt(float(x @ x))
        if normx == 0.0:
            reflectors.append((k, None, 0.0))
            continue
        alpha = -math.copysign(normx, x[0])
        v = x.copy()
        v[0] -= alpha
        beta = 2.0 / float(v @ v)
        a[k:, k:] -= beta * np.outer(v, v @ a[k:, k:])
        a[k, k] = alpha
        a[k + 1:, k] = 0.0
        reflectors.append((k, v, beta))
    return np.triu(a), reflectors, perm


def _apply_qt(reflectors, b: np.ndarray) -> np.ndarray:
    y = np.array(b, dtype=np.float64)
    for k, v, beta in reflectors:
        if v is not None:
            y[k:] -= beta * v * float(v @ y[k:])
    return y


def _apply_q(reflectors, y: np.ndarray) -> np.ndarray:
    x = np.array(y, dtype=np.float64)
    for k, v, beta in reversed(reflectors):
        if v is not None:
            x[k:] -= beta * v * float(v @ x[k:])
    return x


def _back_substitute(r: np.ndarray, c: np.ndarray) -> np.ndarray:
    n = len(c)
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (c[i] - r[i, i + 1:n] @ x[i + 1:]) / r[i, i]
    return x


def _forward_substitute(l: np.ndarray, c: np.ndarray) -> np.ndarray:
    n = len(c)
    x = np.zeros(n)
    for i in range(n):
        x[i] = (c[i] - l[i, :i] @ x[:i]) / l[i, i]
    return x


@dataclass(frozen=True, eq=False)
class PivotedQR:
    """A P = Q R with |R_11| >= |R_22| >= ... (approximately)."""

    matrix: np.ndarray
    r: np.ndarray
    reflectors: list
    perm: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def r_diagonal(self) -> np.ndarray:
        return np.abs(np.diag(self.r))

    def rank(self, rank_tol: float = DEFAULT_RANK_TOL) -> int:
        diag = self.r_diagonal
        if len(diag) == 0 or diag[0] == 0.0:
            return 0
        keep = diag > rank_tol * diag[0]
        # pivoting keeps the diagonal non-increasing, so stop at the first drop
        return int(np.argmin(keep)) if not keep.all() else len(diag)

    def apply_qt(self, b) -> np.ndarray:
        return _apply_qt(self.reflectors, b)


def qr_factor_column_pivot(m) -> PivotedQR:
    matrix = as_dense_matrix(m)
    r, reflectors, perm = _householder_qr(matrix.copy(), pivot=True)
    return PivotedQR(matrix, r, reflectors, perm)


def condition_estimate(fact: PivotedQR, rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """|R_11| / |R_kk| over the retained diagonal, k the numerical rank."""
    k = fact.rank(rank_tol)
    if k == 0:
        return math.inf
    diag = fact.r_diagonal
    return float(diag[0] / diag[k - 1])


@dataclass(frozen=True, eq=False)
class LsSolution:
    x: np.ndarray
    rank: int
    residual_norm: float
    condition_estimate: float


def solve_min_norm_ls(m, b, rank_tol: float = DEFAULT_RANK_TOL) -> LsSolution:
    """Minimum-norm solution of min ||M x - b||_2.

    Columns whose pivoted R diagonal falls below ``rank_tol * |R_11|`` are
    treated as rank-deficient. The retained rows [R11 R12] are reduced to
    lower-triangular form by a second (unpivoted) QR from the right, so that
    the returned x has no component in the numerical null space.
    """
    fact = qr_factor_column_pivot(m)
    b = np.asarray(b, dtype=np.float64)
    rows, cols = fact.shape
    if b.shape != (rows,):
        raise ValidationError(f"rhs has shape {b.shape}, expected ({rows},)")

    k = fact.rank(rank_tol)
    c = fact.apply_qt(b)[:k]
    w = np.zeros(cols)
    if k == cols:
        w = _back_substitute(fact.r[:k, :k], c)
    elif k > 0:
        # [R11 R12]^T = Q2 [T; 0]  =>  [R11 R12] = [T^T 0] Q2^T
        t, reflectors2, _ = _householder_qr(fact.r[:k, :].T.copy(), pivot=False)
        y = _forward_substitute(t[:k, :k].T, c)
        w = _apply_q(reflectors2, np.concatenate([y, np.zeros(cols - k)]))

    x = np.empty(cols)
    x[fact.perm] = w
    residual = float(np.linalg.norm(fact.matrix @ x - b))
    return LsSolution(x, k, residual, condition_estimate(fact, rank_tol))
