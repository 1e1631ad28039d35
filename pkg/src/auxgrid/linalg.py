"""Dense linear algebra for small matrices (n up to ~64).

Self-contained routines: cyclic-Jacobi symmetric eigendecomposition,
induced 2-norm, Kronecker product, scaling-and-squaring matrix
exponential, and Gaussian elimination with partial pivoting. numpy is
used for array storage and elementwise arithmetic only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, ShapeError, SingularMatrixError

# Convergence/termination constants for the iterative routines.
_JACOBI_SWEEPS = 100
_JACOBI_OFF_TOL = 1e-12     # relative to the Frobenius norm of the input
_EXP_SERIES_TOL = 1e-16     # relative truncation of the Taylor series
_EXP_MAX_SQUARINGS = 64
_PIVOT_TOL = 1e-12          # relative to the Frobenius norm of the input


@dataclass(frozen=True)
class SymmetricEigen:
    """Eigendecomposition of a symmetric matrix.

    ``values`` are ascending; ``vectors`` holds orthonormal eigenvectors
    as columns, aligned with ``values``.
    """

    values: np.ndarray
    vectors: np.ndarray


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ShapeError("matrix entries must be finite")
    return a


def _as_square(m) -> np.ndarray:
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    return a


def frobenius(m) -> float:
    """Frobenius norm, the reference scale for relative tolerances here."""
    a = np.asarray(m, dtype=float)
    return float(np.sqrt((a * a).sum()))


def sym_eigen(m) -> SymmetricEigen:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    1e-12 times the input norm (at most 100 sweeps). Eigenvalues are
    returned ascending with matching orthonormal eigenvector columns.

    Raises ShapeError for non-square or asymmetric input (asymmetry
    beyond 1e-12 relative).
    """
    a = _as_square(m)
    n = a.shape[0]
    scale = frobenius(a)
    if scale == 0.0:
        return SymmetricEigen(np.zeros(n), np.eye(n))
    asym = np.abs(a - a.T).max()
    if asym > 1e-12 * scale:
        raise ShapeError(f"matrix is not symmetric (max asymmetry {asym:.3e})")

    a = 0.5 * (a + a.T)  # exact symmetry for the rotation updates
    v = np.eye(n)
    off_tol = _JACOBI_OFF_TOL * scale
    for _ in range(_JACOBI_SWEEPS):
        off = np.sqrt(max((a * a).sum() - (np.diag(a) ** 2).sum(), 0.0))
        if off <= off_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-20 * scale:
                    continue
                # Classical Jacobi rotation annihilating a[p, q].
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    # Deterministic sign: largest-magnitude entry of each column positive.
    for k in range(n):
        idx = np.argmax(np.abs(vectors[:, k]))
        if vectors[idx, k] < 0.0:
            vectors[:, k] = -vectors[:, k]
    return SymmetricEigen(values, vectors)


def operator_norm(m) -> float:
    """Induced 2-norm: sqrt of the largest eigenvalue of M^T M.

    Accepts rectangular input. For symmetric M this equals the largest
    eigenvalue magnitude.
    """
    a = _as_matrix(m)
    if frobenius(a) == 0.0:
        return 0.0
    gram = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
    gram = 0.5 * (gram + gram.T)
    lam_max = sym_eigen(gram).values[-1]
    return float(np.sqrt(max(lam_max, 0.0)))


def kron(a, b) -> np.ndarray:
    """Kronecker product with the block structure (a_ij * B)."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    ra, ca = a.shape
    rb, cb = b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)


def mat_exp(m) -> np.ndarray:
    """Matrix exponential e^M via scaling and squaring.

    The argument is halved until its infinity norm is at most 0.5, the
    Taylor series is summed until the next term falls below 1e-16
    relative, and the result is squared back up.
    """
    a = _as_square(m)
    n = a.shape[0]
    norm = float(np.abs(a).sum(axis=1).max())
    squarings = 0
    while norm / (2.0 ** squarings) > 0.5:
        squarings += 1
        if squarings > _EXP_MAX_SQUARINGS:
            raise DomainError(f"matrix exponential argument too large (norm {norm:.3e})")
    a = a / (2.0 ** squarings)

    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 64):
        term = term @ a / k
        result = result + term
        if frobenius(term) <= _EXP_SERIES_TOL * frobenius(result):
            break
    for _ in range(squarings):
        result = result @ result
    if not np.all(np.isfinite(result)):
        raise DomainError("matrix exponential overflowed")
    return result


def mat_exp_apply(m, t: float, x0) -> np.ndarray:
    """e^(M t) x0 for t >= 0; relative error <= 1e-10 for ||M t|| <= 50."""
    a = _as_square(m)
    if not np.isfinite(t) or t < 0.0:
        raise DomainError(f"time must be finite and nonnegative, got {t}")
    x = np.asarray(x0, dtype=float)
    if x.shape != (a.shape[0],):
        raise ShapeError(f"vector length {x.shape} does not match matrix size {a.shape[0]}")
    return mat_exp(a * t) @ x


def solve(m, b) -> np.ndarray:
    """Solve M x = b by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of stacked right-hand-side columns.
    Raises SingularMatrixError when a pivot falls below 1e-12 times the
    matrix norm.
    """
    a = _as_square(m)
    n = a.shape[0]
    rhs = np.asarray(b, dtype=float)
    single = rhs.ndim == 1
    if single:
        rhs = rhs[:, None]
    if rhs.shape[0] != n:
        raise ShapeError(f"right-hand side has {rhs.shape[0]} rows, expected {n}")
    if not np.all(np.isfinite(rhs)):
        raise ShapeError("right-hand side must be finite")

    aug = np.hstack([a.copy(), rhs.copy()])
    pivot_tol = _PIVOT_TOL * frobenius(a)
    for k in range(n):
        pivot_row = k + int(np.argmax(np.abs(aug[k:, k])))
        pivot = aug[pivot_row, k]
        if abs(pivot) <= pivot_tol:
            raise SingularMatrixError(f"pivot {abs(pivot):.3e} below threshold {pivot_tol:.3e}")
        if pivot_row != k:
            aug[[k, pivot_row]] = aug[[pivot_row, k]]
        factors = aug[k + 1:, k] / aug[k, k]
        aug[k + 1:, k:] -= np.outer(factors, aug[k, k:])

    x = np.zeros_like(rhs)
    for k in range(n - 1, -1, -1):
        x[k] = (aug[k, n:] - aug[k, k + 1: n] @ x[k + 1:]) / aug[k, k]
    return x[:, 0] if single else x


def inverse(m) -> np.ndarray:
    """Matrix inverse via solve against the identity."""
    a = _as_square(m)
    return solve(a, np.eye(a.shape[0]))
