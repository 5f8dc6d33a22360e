"""Small dense real linear-algebra kernel.

Only what the game dynamics need: SPD solves, log-determinants and the
dominant eigenpair of a symmetric PSD matrix. Matrices are plain
``numpy.ndarray`` objects; sizes never exceed a few tens of rows.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "LinAlgError",
    "NotSymmetricError",
    "NotPositiveDefiniteError",
    "NotConvergedError",
    "check_symmetric",
    "cholesky",
    "spd_solve",
    "log_det_spd",
    "dominant_eigenpair",
    "sign_normalize",
]

SYM_RTOL = 1e-10
PIVOT_THRESHOLD = 1e-14


class LinAlgError(ValueError):
    pass


class NotSymmetricError(LinAlgError):
    pass


class NotPositiveDefiniteError(LinAlgError):
    pass


class NotConvergedError(LinAlgError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def _as_square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LinAlgError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LinAlgError("matrix has non-finite entries")
    return A


def check_symmetric(A, rtol=SYM_RTOL):
    """Raise NotSymmetricError unless ``A`` is symmetric to ``rtol`` (relative to max |A_ij|)."""
    A = _as_square(A)
    scale = np.abs(A).max() if A.size else 0.0
    asym = np.abs(A - A.T).max() if A.size else 0.0
    if asym > rtol * scale:
        raise NotSymmetricError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    return A


def _potrf(A):
    L, info = lapack.dpotrf(A, lower=1, clean=1)
    if info != 0:
        raise NotPositiveDefiniteError(f"matrix is not positive definite (potrf info {info})")
    d = L.diagonal()
    if d.min() ** 2 <= PIVOT_THRESHOLD * A.diagonal().max():
        raise NotPositiveDefiniteError("matrix is not positive definite (pivot below threshold)")
    return L


def cholesky(A, check=True):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    A pivot is rejected when its square falls below ``PIVOT_THRESHOLD``
    times the largest diagonal entry, so the test is scale free. With
    ``check=False`` the symmetry and finiteness checks are skipped; callers
    that assemble covariances themselves use it in inner loops.
    """
    A = check_symmetric(A) if check else np.asarray(A, dtype=float)
    return _potrf(A)


def spd_solve(A, b, check=True):
    """Solve ``A x = b`` for symmetric positive-definite ``A``.

    ``b`` may be a vector or a matrix of right-hand sides (one per column).
    """
    L = cholesky(A, check=check)
    b = np.asarray(b, dtype=float)
    x, info = lapack.dpotrs(L, b, lower=1)
    if info != 0:
        raise LinAlgError(f"potrs failed (info {info})")
    return x


def log_det_spd(A, check=True):
    """log det A from the Cholesky factor (no explicit determinant)."""
    L = cholesky(A, check=check)
    return 2.0 * float(np.log(L.diagonal()).sum())


def sign_normalize(v, atol=1e-9):
    """Flip ``v`` so that its first component with ``|v_i| > atol`` is positive."""
    v = np.asarray(v, dtype=float)
    idx = np.flatnonzero(np.abs(v) > atol)
    if idx.size and v[idx[0]] < 0:
        return -v
    return v


def _eigh_top(A):
    w, V = np.linalg.eigh(A)
    return float(w[-1]), V[:, -1]


def _aux_start(n, attempt):
    # deterministic restart vectors; no global RNG
    rng = np.random.default_rng(0x5EED + attempt)
    return rng.standard_normal(n)


def _power_run(A, B, v, max_iter, rtol):
    rq = float(v @ A @ v)
    for _ in range(max_iter):
        w = B @ v
        v = w / np.linalg.norm(w)
        rq_new = float(v @ A @ v)
        if abs(rq_new - rq) <= rtol * max(abs(rq_new), 1e-300):
            return rq_new, v, True
        rq = rq_new
    return rq, v, False


def _power_iteration(A, max_iter=10_000, rtol=1e-12):
    n = A.shape[0]
    norm_a = np.abs(A).max()
    if norm_a == 0.0:
        v = np.zeros(n)
        v[0] = 1.0
        return 0.0, v
    B = A + 1e-12 * max(np.trace(A), 0.0) * np.eye(n)
    # e_1 first; a second deterministic start guards against e_1 sitting in
    # (or being an eigenvector of) a non-dominant invariant subspace
    starts = []
    e1 = np.zeros(n)
    e1[0] = 1.0
    if np.linalg.norm(A @ e1) > 1e-14 * norm_a:
        starts.append(e1)
    for attempt in range(4):
        v = _aux_start(n, attempt)
        v /= np.linalg.norm(v)
        if np.linalg.norm(A @ v) > 1e-14 * norm_a:
            starts.append(v)
            break
    best = None
    for v0 in starts:
        rq, v, ok = _power_run(A, B, v0, max_iter, rtol)
        if not ok:
            residual = float(np.linalg.norm(A @ v - rq * v))
            raise NotConvergedError("power iteration hit its iteration cap", residual)
        if best is None or rq > best[0] * (1 + 1e-10):
            best = (rq, v)
    return best


def dominant_eigenpair(A, method="eigh", check=True):
    """Largest eigenvalue and unit eigenvector of a symmetric PSD matrix.

    Parameters
    ----------
    A : (n, n) array_like
        Symmetric positive semidefinite matrix.
    method : {"eigh", "power"}
        ``"eigh"`` uses the LAPACK symmetric solver and keeps the top pair;
        ``"power"`` runs shifted power iteration from ``e_1``.

    Returns
    -------
    (float, ndarray)
        Eigenvalue and eigenvector, the latter with unit norm and its
        first non-negligible entry positive.
    """
    A = check_symmetric(A) if check else A
    if method == "eigh":
        try:
            lam, v = _eigh_top(A)
        except np.linalg.LinAlgError as exc:
            raise NotConvergedError(f"eigh failed: {exc}", float("nan")) from None
    elif method == "power":
        lam, v = _power_iteration(A)
    else:
        raise ValueError(f"unknown method {method!r}")
    v = v / np.linalg.norm(v)
    return max(lam, 0.0), sign_normalize(v)
