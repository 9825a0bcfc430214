"""Dense matrix kernels: skew exponential, rotation logarithm, QR and SVD.

Everything here is a pure function of its arguments. QR and SVD outputs use
fixed sign conventions so that identical inputs give identical outputs.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from flaggeo.errors import InvalidInput, LogNearCutLocus

SKEW_TOL = 1e-12
ORTHO_TOL = 1e-8
CUT_LOCUS_TOL = 1e-6


def _as_finite(X, name: str = "matrix", ndim: int = 2) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != ndim:
        raise InvalidInput(f"{name} must be {ndim}-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput(f"{name} has non-finite entries")
    return X


def _as_square(X, name: str = "matrix") -> np.ndarray:
    X = _as_finite(X, name)
    if X.shape[0] != X.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {X.shape}")
    return X


def skew(A, tol: float = SKEW_TOL) -> np.ndarray:
    """Return ``(A - A.T) / 2`` after checking ``A`` is skew within ``tol``.

    The tolerance is relative to ``max(1, max|A|)``; it only strips
    floating-point asymmetry and rejects anything larger.
    """
    A = _as_square(A, "skew-symmetric matrix")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if np.max(np.abs(A + A.T), initial=0.0) > tol * scale:
        raise InvalidInput("matrix is not skew-symmetric")
    return 0.5 * (A - A.T)


def is_orthonormal(X, tol: float = 1e-10) -> bool:
    """True if ``X.T @ X`` is the identity within Frobenius ``tol``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] > X.shape[0]:
        return False
    return bool(np.linalg.norm(X.T @ X - np.eye(X.shape[1])) <= tol)


def is_special_orthogonal(R, tol: float = 1e-10) -> bool:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        return False
    return is_orthonormal(R, tol) and abs(np.linalg.det(R) - 1.0) <= tol


def expm_skew(A) -> np.ndarray:
    """Matrix exponential of a skew-symmetric matrix (a rotation)."""
    return _expm(skew(A))


def _expm(A: np.ndarray) -> np.ndarray:
    if not A.any():
        return np.eye(A.shape[0])
    return scipy.linalg.expm(A)


# Taylor degree 16 reaches double precision for 1-norm <= 0.8. Row j holds
# the coefficients of I, A, A^2, A^3 in the j-th Paterson-Stockmeyer chunk.
_TAYLOR = np.array([1.0 / math.factorial(i) for i in range(16)]).reshape(4, 4)
_TAYLOR_16 = 1.0 / math.factorial(16)
_TAYLOR_THETA = 0.8


def _expm_batch(A: np.ndarray) -> np.ndarray:
    """Exponentials of a stack of skew matrices, shape (b, n, n).

    Taylor polynomial with scaling and squaring, vectorized over the stack:
    matrix products only and one scaling for the whole stack, chosen from
    the largest 1-norm. Stacked solves cost far more than products at these
    sizes, which is why a Pade approximant is not used.
    """
    n = A.shape[-1]
    norm = float(np.max(np.abs(A).sum(axis=-2), initial=0.0))
    if norm == 0.0:
        return np.broadcast_to(np.eye(n), A.shape).copy()
    s = max(0, math.ceil(math.log2(norm / _TAYLOR_THETA)))
    if s:
        A = A / 2.0**s
    A2 = A @ A
    A4 = A2 @ A2
    chunks = np.tensordot(_TAYLOR[:, 1:], np.stack([A, A2, A2 @ A]), axes=1)
    diag = chunks.reshape(4, -1, n * n)[:, :, :: n + 1]
    diag += _TAYLOR[:, :1, None]
    R = chunks[3] + _TAYLOR_16 * A4
    for j in (2, 1, 0):
        R = chunks[j] + A4 @ R
    for _ in range(s):
        R = R @ R
    return R


def logm_so(R, tol: float = ORTHO_TOL, cut_tol: float = CUT_LOCUS_TOL) -> np.ndarray:
    """Principal logarithm of a special orthogonal matrix.

    The real Schur form of a rotation is block diagonal with 2x2 rotation
    blocks and 1x1 blocks equal to +-1. Each block's angle comes from
    ``atan2`` and the skew generator is mapped back through the Schur
    vectors.

    Raises
    ------
    InvalidInput
        If ``R`` is not orthogonal within ``tol`` or has negative determinant.
    LogNearCutLocus
        If some rotation angle is within ``cut_tol`` of pi, where the
        principal logarithm stops being unique.
    """
    R = _as_square(R)
    n = R.shape[0]
    if np.linalg.norm(R.T @ R - np.eye(n)) > tol:
        raise InvalidInput("orthonormality violated: matrix is not orthogonal")
    if np.linalg.det(R) <= 0:
        raise InvalidInput("determinant is not +1")
    return _logm(R, cut_tol)


def _logm(R: np.ndarray, cut_tol: float = CUT_LOCUS_TOL) -> np.ndarray:
    """:func:`logm_so` without input validation."""
    T, Z = scipy.linalg.schur(R, output="real", check_finite=False)
    n = T.shape[0]
    diag = T.diagonal().tolist()
    sub = T.diagonal(-1).tolist()
    sup = T.diagonal(1).tolist()
    limit = math.pi - cut_tol
    L = np.zeros_like(T)
    i = 0
    while i < n:
        # LAPACK leaves an exact zero below every 1x1 block.
        if i + 1 < n and sub[i] != 0.0:
            theta = math.atan2(0.5 * (sub[i] - sup[i]), 0.5 * (diag[i] + diag[i + 1]))
            if abs(theta) > limit:
                raise LogNearCutLocus(f"rotation angle {theta:.12g} is within {cut_tol} of pi")
            L[i + 1, i] = theta
            L[i, i + 1] = -theta
            i += 2
        else:
            if diag[i] < 0:
                raise LogNearCutLocus("rotation angle pi (eigenvalue -1)")
            i += 1
    L = Z @ L @ Z.T
    return 0.5 * (L - L.T)


def _logm_batch(R: np.ndarray, cut_tol: float = CUT_LOCUS_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Principal logarithms of a stack of rotations, shape (b, n, n).

    Uses the commuting split ``R = C + S`` into symmetric and skew parts.
    An eigenvector ``v`` of ``C`` lies in an invariant plane of ``R`` with
    ``C v = cos(theta) v`` and ``|S v| = sin(theta)``, so
    ``log R = S @ V diag(theta / sin(theta)) V^T``. Taking the sine from
    ``S`` rather than from ``1 - cos^2`` keeps full accuracy near pi.

    Returns ``(L, ok)``; ``ok[i]`` is False where some angle is within
    ``cut_tol`` of pi, and ``L[i]`` is then meaningless.
    """
    C = 0.5 * (R + np.swapaxes(R, -1, -2))
    S = 0.5 * (R - np.swapaxes(R, -1, -2))
    c, V = np.linalg.eigh(C)
    SV = S @ V
    s = np.linalg.norm(SV, axis=-2)
    theta = np.arctan2(s, c)
    ok = np.all(theta < math.pi - cut_tol, axis=-1)
    g = np.ones_like(s)
    np.divide(theta, s, out=g, where=s > 0)
    L = (SV * g[..., None, :]) @ np.swapaxes(V, -1, -2)
    return 0.5 * (L - np.swapaxes(L, -1, -2)), ok


def qr_thin(X) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR with a nonnegative diagonal in ``R``.

    Returns ``(Q, R)`` with ``Q`` of shape (n, m) and ``R`` (m, m).
    """
    X = _as_finite(X)
    if X.shape[1] > X.shape[0]:
        raise InvalidInput(f"qr_thin needs m <= n, got shape {X.shape}")
    Q, R = np.linalg.qr(X, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def svd_compact(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Compact SVD ``X = U @ diag(s) @ V.T``.

    Singular values come back in descending order. The largest-magnitude
    entry of every left singular vector is made positive, and ``V`` is
    flipped to match.
    """
    X = _as_finite(X)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    V = Vt.T
    if U.size:
        idx = np.argmax(np.abs(U), axis=0)
        signs = np.where(U[idx, np.arange(U.shape[1])] < 0, -1.0, 1.0)
        U = U * signs
        V = V * signs
    return U, s, V


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of SO(n)."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_skew(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    A = rng.standard_normal((n, n)) * scale
    return A - A.T
