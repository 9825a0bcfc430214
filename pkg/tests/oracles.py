"""Independent reference computations used by the tests.

None of these call into flaggeo's numerical routines; they rebuild each
quantity from a different formula.
"""

import math

import numpy as np
import scipy.linalg
import scipy.optimize


def expm_taylor(A: np.ndarray, terms: int = 30) -> np.ndarray:
    """Scaling and squaring with a plain Taylor sum."""
    norm = np.linalg.norm(A, 1)
    s = max(0, math.ceil(math.log2(norm))) + 1 if norm > 0 else 0
    B = A / 2.0**s
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for i in range(1, terms):
        term = term @ B / i
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def rodrigues(axis: np.ndarray, theta: float) -> np.ndarray:
    """Rotation by ``theta`` about a unit ``axis`` in R^3."""
    a = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(theta) * K + (1 - math.cos(theta)) * K @ K


def principal_angles_eig(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """arccos of the square roots of the eigenvalues of X^T Y Y^T X, ascending."""
    M = X.T @ Y @ Y.T @ X
    w = np.linalg.eigvalsh(0.5 * (M + M.T))[::-1]
    return np.arccos(np.clip(np.sqrt(np.clip(w, 0.0, None)), -1.0, 1.0))


def skew_length_eig(H: np.ndarray) -> float:
    """sqrt(1/2 sum |lambda_j|^2) over the (imaginary) eigenvalues of H."""
    lam = np.linalg.eigvals(H)
    return math.sqrt(0.5 * float(np.sum(np.abs(lam) ** 2)))


def mds_gram(D: np.ndarray) -> np.ndarray:
    """Double-centered Gram matrix written out entrywise."""
    D2 = np.asarray(D, dtype=float) ** 2
    return -0.5 * (D2 - D2.mean(axis=0)[None, :] - D2.mean(axis=1)[:, None] + D2.mean())


def reflections(parts) -> list[np.ndarray]:
    """Diagonal sign matrices that flip the first axis of an even number of blocks."""
    starts = np.cumsum((0,) + tuple(parts[:-1]))
    n = sum(parts)
    out = []
    for mask in range(2 ** len(parts)):
        chosen = [b for b in range(len(parts)) if mask >> b & 1]
        if len(chosen) % 2:
            continue
        d = np.ones(n)
        d[starts[chosen]] = -1.0
        out.append(np.diag(d))
    return out


def flag_distance_bfgs(Q1: np.ndarray, Q2: np.ndarray, parts, starts: int = 12, seed: int = 0) -> float:
    """Minimize ||log(Q_i expm(-G))|| over vertical G with BFGS.

    Uses scipy's general ``logm``/``expm`` and every sign representative.
    At a minimizer the logarithm is horizontal, so the minimum is the
    geodesic distance whenever the search reaches the global basin.
    """
    n = sum(parts)
    labels = np.repeat(np.arange(len(parts)), parts)
    mask = labels[:, None] == labels[None, :]
    idx = np.nonzero(np.tril(mask, -1))
    rng = np.random.default_rng(seed)
    best = math.inf
    for S in reflections(parts):
        Qi = Q1.T @ Q2 @ S

        def f(v):
            G = np.zeros((n, n))
            G[idx] = v
            G = G - G.T
            L = scipy.linalg.logm(Qi @ scipy.linalg.expm(-G)).real
            return 0.5 * float(np.sum(L * L))

        if len(idx[0]) == 0:
            best = min(best, math.sqrt(f(np.zeros(0))))
            continue
        for s in range(starts):
            v0 = rng.uniform(-math.pi, math.pi, len(idx[0])) if s else np.zeros(len(idx[0]))
            res = scipy.optimize.minimize(f, v0, method="BFGS")
            best = min(best, math.sqrt(res.fun))
    return best


def haar(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar rotation from a QR with sign fix (independent of flaggeo)."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, [0, 1]] = Q[:, [1, 0]]
    return Q


def block_rotation(parts, rng: np.random.Generator, det_one: bool = True) -> np.ndarray:
    """Random block-diagonal orthogonal matrix with blocks of the given sizes."""
    n = sum(parts)
    M = np.zeros((n, n))
    i = 0
    for p in parts:
        B, R = np.linalg.qr(rng.standard_normal((p, p)))
        M[i:i + p, i:i + p] = B * np.sign(np.diag(R))
        i += p
    if det_one and np.linalg.det(M) < 0:
        M[:, 0] = -M[:, 0]
    return M
