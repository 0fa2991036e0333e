"""Small dense symmetric matrices: Cholesky, inverse quadratic forms, Schur complements.

Dimensions here are tiny (a handful of scores), so everything is written
out directly without pivoting; a failed pivot is informative rather than
something to work around.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotPositiveDefinite

MAX_DIM = 64
PIVOT_RATIO = 1e-12


def as_sym(A) -> np.ndarray:
    """Copy ``A`` into a symmetric float array (upper triangle mirrored)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {A.shape[0]} exceeds the limit of {MAX_DIM}")
    upper = np.triu(A)
    return upper + np.triu(A, 1).T


def cholesky(A) -> np.ndarray:
    """Lower-triangular L with L L^T = A.

    Raises
    ------
    NotPositiveDefinite
        When a pivot is non-positive, or negligible relative to the diagonal
        entry it came from (ratio below 1e-12).  ``.pivot`` is 1-based.
    """
    A = as_sym(A)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if not np.isfinite(d) or d <= 0 or d <= PIVOT_RATIO * abs(A[j, j]):
            raise NotPositiveDefinite(j + 1, f"matrix is not positive definite at pivot {j + 1} (residual {d:.3g})")
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def is_positive_definite(A) -> bool:
    try:
        cholesky(A)
    except NotPositiveDefinite:
        return False
    return True


def quadratic_form_inv(A, M) -> float:
    """M^T A^{-1} M through one Cholesky factor and a triangular solve."""
    L = cholesky(A)
    M = np.atleast_1d(np.asarray(M, dtype=float))
    if M.shape != (L.shape[0],):
        raise ValueError(f"vector of length {M.shape} does not match a {L.shape[0]}x{L.shape[0]} matrix")
    y = solve_triangular(L, M, lower=True)
    return float(y @ y)


def solve(A, b) -> np.ndarray:
    """A^{-1} b for symmetric positive definite A."""
    L = cholesky(A)
    y = solve_triangular(L, np.asarray(b, dtype=float), lower=True)
    return solve_triangular(L.T, y, lower=False)


def schur_complement(sigma_t, sigma_ts, sigma_s):
    """Return ``(S, J)`` with J = Σ_TS Σ_S^{-1} Σ_ST and S = Σ_T - J."""
    sigma_t = as_sym(sigma_t)
    sigma_ts = np.atleast_2d(np.asarray(sigma_ts, dtype=float))
    L = cholesky(sigma_s)
    if sigma_ts.shape != (sigma_t.shape[0], L.shape[0]):
        raise ValueError(f"cross block has shape {sigma_ts.shape}, expected "
                         f"{(sigma_t.shape[0], L.shape[0])}")
    W = solve_triangular(L, sigma_ts.T, lower=True)
    J = as_sym(W.T @ W)
    return as_sym(sigma_t - J), J


def condition_estimate(A) -> float:
    """Ratio of largest to smallest squared Cholesky pivot (cheap 2-norm proxy)."""
    d = np.diag(cholesky(A)) ** 2
    return float(d.max() / d.min())


def largest_pd_block(A) -> int:
    """Size of the largest positive definite leading principal block (0 if none)."""
    try:
        cholesky(A)
        return as_sym(A).shape[0]
    except NotPositiveDefinite as exc:
        return exc.pivot - 1
