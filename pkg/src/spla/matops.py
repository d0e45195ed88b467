"""Dense linear-algebra kernels used throughout the package.

All routines operate on plain ``numpy.ndarray`` values (row-major, float64)
and are pure functions: no shared mutable state, safe for concurrent callers.
The symmetric eigensolver, Cholesky factorization, QR decomposition and SPD
solver are implemented directly; the general SVD delegates to LAPACK via
:func:`numpy.linalg.svd`.

Tolerances are module-level constants and may be overridden per call.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "MatopsError",
    "NonSymmetricError",
    "NotPositiveDefiniteError",
    "NoConvergenceError",
    "RankDeficientError",
    "sym_eigen",
    "cholesky_upper",
    "qr_decompose",
    "svd",
    "soft_threshold",
    "solve_spd",
]

#: Default symmetry tolerance for :func:`sym_eigen`.
DEFAULT_SYM_TOL = 1e-8
#: Cyclic-Jacobi sweep cap for :func:`sym_eigen`.
JACOBI_MAX_SWEEPS = 100
#: Relative pivot floor below which a matrix is declared not positive definite.
CHOLESKY_PIVOT_RTOL = 1e-12


class MatopsError(Exception):
    """Base class for numerical kernel failures."""


class NonSymmetricError(MatopsError):
    """A routine requiring a symmetric matrix received an asymmetric one."""


class NotPositiveDefiniteError(MatopsError):
    """A pivot collapsed: the matrix is not positive definite."""


class NoConvergenceError(MatopsError):
    """An iterative scheme hit its iteration cap before converging."""


class RankDeficientError(MatopsError):
    """A matrix required to have full rank is (numerically) rank deficient."""


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def sym_eigen(a, tol: float = DEFAULT_SYM_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition ``a = V diag(lam) V^T`` of a symmetric matrix.

    Uses a cyclic Jacobi scheme (rotations zeroing each off-diagonal entry in
    turn) with a cap of :data:`JACOBI_MAX_SWEEPS` sweeps.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order; ties are broken by original column index (stable sort),
    and each eigenvector column has a nonnegative largest-magnitude component
    so the decomposition is deterministic.
    """
    a = _as_matrix(a)
    m = a.shape[0]
    if a.shape[1] != m:
        raise NonSymmetricError("matrix is not square")
    asym = np.max(np.abs(a - a.T)) if m > 1 else 0.0
    if asym > tol:
        raise NonSymmetricError(f"max |a_ij - a_ji| = {asym:g} exceeds tol {tol:g}")

    w = (a + a.T) / 2.0
    v = np.eye(m)
    if m == 1:
        return w.diagonal().copy(), v

    off_tol = 1e-14 * max(1.0, np.max(np.abs(w)))
    for _ in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = w[p, q]
                off = max(off, abs(apq))
                if abs(apq) <= off_tol:
                    continue
                # Jacobi rotation zeroing w[p, q].
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                w[[p, q], :] = rot.T @ w[[p, q], :]
                w[:, [p, q]] = w[:, [p, q]] @ rot
                w[p, q] = w[q, p] = 0.0
                v[:, [p, q]] = v[:, [p, q]] @ rot
        if off <= off_tol:
            break
    else:
        raise NoConvergenceError(
            f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )

    lam = w.diagonal().copy()
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    v = v[:, order]
    # Deterministic signs: largest-magnitude component of each column >= 0.
    for j in range(m):
        k = np.argmax(np.abs(v[:, j]))
        if v[k, j] < 0:
            v[:, j] = -v[:, j]
    return lam, v


def cholesky_upper(a) -> np.ndarray:
    """Upper-triangular ``R`` with ``R^T R = a`` and positive diagonal.

    Raises :class:`NotPositiveDefiniteError` when a pivot falls at or below
    ``CHOLESKY_PIVOT_RTOL * max(diag(a))``.
    """
    a = _as_matrix(a)
    m = a.shape[0]
    if a.shape[1] != m:
        raise NonSymmetricError("matrix is not square")
    r = np.zeros((m, m))
    floor = CHOLESKY_PIVOT_RTOL * max(np.max(np.abs(a.diagonal())), 1e-300)
    for i in range(m):
        pivot = a[i, i] - r[:i, i] @ r[:i, i]
        if pivot <= floor:
            raise NotPositiveDefiniteError(f"pivot {pivot:g} at index {i}")
        r[i, i] = np.sqrt(pivot)
        if i + 1 < m:
            r[i, i + 1:] = (a[i, i + 1:] - r[:i, i] @ r[:i, i + 1:]) / r[i, i]
    return r


def qr_decompose(a) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR decomposition via Householder reflections.

    Requires ``rows >= cols``. The diagonal of ``R`` is made nonnegative by
    flipping signs into ``Q``, so ``r_ii`` is unambiguous. Rank deficiency is
    not an error: it surfaces as (near-)zero diagonal entries in ``R``.
    """
    a = _as_matrix(a)
    n, m = a.shape
    if n < m:
        raise ValueError(f"qr_decompose requires rows >= cols, got {n}x{m}")
    r = a.copy()
    q = np.eye(n)
    for k in range(m):
        x = r[k:, k]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            continue
        v = x.copy()
        v[0] += np.copysign(normx, x[0]) if x[0] != 0 else normx
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        r[k:, k:] -= 2.0 * np.outer(v, v @ r[k:, k:])
        q[:, k:] -= 2.0 * np.outer(q[:, k:] @ v, v)
    q = q[:, :m]
    r = np.triu(r[:m, :])
    # Sign fix: nonnegative diagonal.
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    r = signs[:, None] * r
    q = q * signs[None, :]
    return q, r


def svd(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular value decomposition ``a = U diag(s) V^T``.

    Returns ``(U, s, V)`` (note: ``V``, not ``V^T``) with singular values in
    descending order. Delegates to LAPACK; a LAPACK convergence failure is
    reported as :class:`NoConvergenceError`.
    """
    a = _as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NoConvergenceError(str(exc)) from exc
    return u, s, vt.T


def soft_threshold(v, delta: float) -> np.ndarray:
    """Component-wise ``sign(v_i) * max(|v_i| - delta, 0)``."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - delta, 0.0)


def _solve_upper(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = r.shape[0]
    x = np.zeros_like(b, dtype=float)
    for i in range(m - 1, -1, -1):
        x[i] = (b[i] - r[i, i + 1:] @ x[i + 1:]) / r[i, i]
    return x


def _solve_lower(lo: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = lo.shape[0]
    x = np.zeros_like(b, dtype=float)
    for i in range(m):
        x[i] = (b[i] - lo[i, :i] @ x[:i]) / lo[i, i]
    return x


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive-definite ``a``.

    Factors ``a = R^T R`` with :func:`cholesky_upper` and performs two
    triangular solves; no inverse is formed.
    """
    a = _as_matrix(a)
    b = np.asarray(b, dtype=float)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    r = cholesky_upper(a)
    y = _solve_lower(r.T, b)
    x = _solve_upper(r, y)
    return x[:, 0] if squeeze else x
