"""Geometry of flag manifolds realized as quotients of SO(n).

A point ``[Q]`` is the class of ``Q @ M`` over block-diagonal ``M`` with
orthogonal blocks whose determinants multiply to +1. Tangent directions are
skew matrices; the block-diagonal ones (vertical) leave the flag unchanged
and the ones with zero diagonal blocks (horizontal) move it.

Distances are found by solving ``Q = expm(H) @ expm(G)`` for horizontal
``H`` and vertical ``G`` with an alternating projected-logarithm iteration,
repeated over every oriented representative of the target and over several
random starts, keeping the shortest ``H``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from flaggeo.errors import (
    InvalidInput,
    LogNearCutLocus,
    NoConvergedTrial,
    NotApplicable,
    RankDeficient,
)
from flaggeo.matfun import (
    _as_finite,
    _expm_batch,
    _logm_batch,
    expm_skew,
    logm_so,
    qr_thin,
    skew,
)


@dataclass(frozen=True)
class FlagSignature:
    """Block sizes ``(n_1, ..., n_d)`` of a flag in R^n."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if len(parts) < 2:
            raise InvalidInput(f"a flag signature needs at least 2 parts, got {parts}")
        if any(p < 1 for p in parts):
            raise InvalidInput(f"signature parts must be positive, got {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def parse(cls, text: str) -> "FlagSignature":
        """Parse ``"2,3,45"``."""
        try:
            return cls(tuple(int(t) for t in text.split(",") if t.strip()))
        except ValueError as exc:
            raise InvalidInput(f"bad signature {text!r}: {exc}") from None

    @classmethod
    def from_leading(cls, leading: Sequence[int], n: int) -> "FlagSignature":
        """Signature with the given leading parts and trailing part ``n - k``."""
        k = sum(leading)
        if k >= n:
            raise InvalidInput(f"leading parts sum to {k}, need < n = {n}")
        return cls(tuple(leading) + (n - k,))

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def d(self) -> int:
        return len(self.parts)

    @property
    def k(self) -> int:
        return self.n - self.parts[-1]

    @property
    def block_starts(self) -> tuple[int, ...]:
        """0-based first column of each block."""
        return tuple(itertools.accumulate(self.parts[:-1], initial=0))

    def blocks(self) -> list[slice]:
        return [slice(s, s + p) for s, p in zip(self.block_starts, self.parts)]

    def vertical_mask(self) -> np.ndarray:
        """Boolean n x n mask of the diagonal blocks."""
        labels = np.repeat(np.arange(self.d), self.parts)
        return labels[:, None] == labels[None, :]

    def __str__(self) -> str:
        return ",".join(map(str, self.parts))


def _signature(sig) -> FlagSignature:
    if isinstance(sig, FlagSignature):
        return sig
    if isinstance(sig, str):
        return FlagSignature.parse(sig)
    return FlagSignature(tuple(sig))


def _parts(sig) -> tuple[int, ...]:
    """Block sizes from a signature, a string or a sequence (one part allowed)."""
    if isinstance(sig, FlagSignature):
        return sig.parts
    if isinstance(sig, str):
        try:
            return tuple(int(t) for t in sig.split(",") if t.strip())
        except ValueError:
            raise InvalidInput(f"bad signature {sig!r}") from None
    return tuple(int(p) for p in sig)


def canonicalize(Q: np.ndarray, sig: FlagSignature) -> np.ndarray:
    """Move an orthogonal ``Q`` into SO(n) without changing its flag.

    A negative determinant is fixed by negating the first column of the last
    block.
    """
    Q = np.array(Q, dtype=float)
    if np.linalg.det(Q) < 0:
        Q[:, sig.block_starts[-1]] *= -1.0
    return Q


def complete_frame(X: np.ndarray) -> np.ndarray:
    """Extend orthonormal columns ``X`` (n x k) to an n x n orthogonal matrix.

    The complement comes from the Householder QR of ``X``; the first k
    columns are ``X`` itself.
    """
    n, k = X.shape
    Qc, _ = np.linalg.qr(X, mode="complete")
    out = np.empty((n, n))
    out[:, :k] = X
    out[:, k:] = Qc[:, k:]
    return out


@dataclass(frozen=True, eq=False)
class FlagPoint:
    """A point on a flag manifold, stored as a special orthogonal representative."""

    signature: FlagSignature
    Q: np.ndarray = field(repr=False)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @classmethod
    def from_matrix(cls, X, signature, tol: float = 1e-10) -> "FlagPoint":
        """Build a flag point from an orthonormal matrix.

        ``X`` is either n x n orthogonal or n x k with orthonormal columns.
        ``signature`` holds either the full block sizes (summing to n) or
        just the leading ones (summing to k < n). An n x k frame is
        completed to n x n; the extra columns are arbitrary within the class.
        Determinant -1 is canonicalized.
        """
        X = _as_finite(X, "frame")
        n, k = X.shape
        parts = _parts(signature)
        if any(p < 1 for p in parts):
            raise InvalidInput(f"signature parts must be positive, got {parts}")
        if k > n:
            raise InvalidInput(f"frame has more columns than rows: {X.shape}")
        err = np.linalg.norm(X.T @ X - np.eye(k))
        if err > tol:
            raise InvalidInput(f"orthonormality violated: ||X^T X - I||_F = {err:.3g}")
        total = sum(parts)
        if total == n:
            sig = FlagSignature(parts)
            lead = sig.k
            if k not in (lead, n):
                raise InvalidInput(f"frame has {k} columns; signature {sig} needs {lead} or {n}")
        elif total < n and k in (total, n):
            sig = FlagSignature.from_leading(parts, n)
        else:
            raise InvalidInput(f"signature {parts} does not fit a {n}x{k} frame")
        Q = X if k == n else complete_frame(X)
        return cls(sig, canonicalize(Q, sig))

    @property
    def n(self) -> int:
        return self.signature.n

    def frame(self) -> np.ndarray:
        """The first k columns, which determine the flag."""
        return self.Q[:, : self.signature.k]


def _check_dim(A: np.ndarray, sig: FlagSignature) -> None:
    if A.shape != (sig.n, sig.n):
        raise InvalidInput(f"expected {sig.n}x{sig.n} matrix for signature {sig}, got {A.shape}")


@dataclass(frozen=True, eq=False)
class HorizontalTangent:
    """Skew matrix with zero diagonal blocks: a direction that moves the flag."""

    signature: FlagSignature
    H: np.ndarray = field(repr=False)

    def __post_init__(self):
        H = skew(self.H)
        _check_dim(H, self.signature)
        if np.any(H[self.signature.vertical_mask()]):
            raise InvalidInput("horizontal tangent has nonzero diagonal blocks")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)


@dataclass(frozen=True, eq=False)
class VerticalTangent:
    """Block-diagonal skew matrix: a direction that preserves the flag."""

    signature: FlagSignature
    G: np.ndarray = field(repr=False)

    def __post_init__(self):
        G = skew(self.G)
        _check_dim(G, self.signature)
        if np.any(G[~self.signature.vertical_mask()]):
            raise InvalidInput("vertical tangent has nonzero off-diagonal blocks")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)


def _horizontal(A: np.ndarray, sig: FlagSignature) -> np.ndarray:
    out = A.copy()
    out[sig.vertical_mask()] = 0.0
    return out


def _vertical(A: np.ndarray, sig: FlagSignature) -> np.ndarray:
    out = A.copy()
    out[~sig.vertical_mask()] = 0.0
    return out


def project_horizontal(A, sig) -> HorizontalTangent:
    """Zero the diagonal blocks of a skew matrix."""
    sig = _signature(sig)
    A = skew(A)
    _check_dim(A, sig)
    return HorizontalTangent(sig, _horizontal(A, sig))


def project_vertical(A, sig) -> VerticalTangent:
    """Keep only the diagonal blocks of a skew matrix."""
    sig = _signature(sig)
    A = skew(A)
    _check_dim(A, sig)
    return VerticalTangent(sig, _vertical(A, sig))


def _length(H: np.ndarray) -> float:
    return math.sqrt(0.5 * float(np.sum(H * H)))


def geodesic_length(H) -> float:
    """Length ``sqrt(tr(H^T H) / 2)`` of the geodesic ``t -> Q expm(tH)``, t in [0, 1]."""
    if isinstance(H, HorizontalTangent):
        H = H.H
    return _length(np.asarray(H, dtype=float))


def flag_exp(P: FlagPoint, H, t: float = 1.0) -> FlagPoint:
    """Point reached at time ``t`` along the geodesic from ``P`` with direction ``H``."""
    if isinstance(H, HorizontalTangent):
        if H.signature != P.signature:
            raise InvalidInput(f"signature mismatch: {H.signature} vs {P.signature}")
        H = H.H
    H = np.asarray(H, dtype=float)
    _check_dim(H, P.signature)
    if t == 0:
        return P
    return FlagPoint(P.signature, P.Q @ expm_skew(t * H))


def _negate_first_columns(Q: np.ndarray, sig: FlagSignature) -> list[np.ndarray]:
    starts = sig.block_starts
    reps = [Q]
    for size in range(2, sig.d + 1, 2):
        for chosen in itertools.combinations(range(sig.d), size):
            Qi = Q.copy()
            cols = [starts[b] for b in chosen]
            Qi[:, cols] *= -1.0
            reps.append(Qi)
    return reps


def enumerate_representatives(P: FlagPoint) -> list[FlagPoint]:
    """All 2^(d-1) fully oriented representatives of ``P``.

    Element 0 is ``P``. Each other element negates the first column of every
    block in an even-sized subset of blocks, taken in order of subset size
    and then lexicographically.
    """
    return [FlagPoint(P.signature, Qi) for Qi in _negate_first_columns(P.Q, P.signature)]


@dataclass(frozen=True)
class SolverConfig:
    """Parameters for the distance search.

    ``restarts`` trials run per representative. The first starts from
    ``G = 0``, the next two from block-polar alignments
    (:func:`aligned_vertical`), and the rest alternate between random
    vertical matrices with entries uniform on ``[-broad_scale, broad_scale]``
    and the alignment perturbed by entries uniform on
    ``[-init_scale, init_scale]``. A trial aborts when the
    residual has not improved for ``patience`` iterations, and all trials
    of one distance query advance together as a stacked batch.

    ``memory`` > 0 applies Anderson extrapolation over that many previous
    sweeps to the vertical iterate; the sweep itself is unchanged, and 0
    gives the bare alternating iteration.
    """

    restarts: int = 5
    max_iter: int = 100
    eps: float = 1e-10
    seed: int = 0
    init_scale: float = 0.5
    broad_scale: float = math.pi
    patience: int = 10
    memory: int = 10

    def __post_init__(self):
        if self.restarts < 1 or self.max_iter < 1 or self.patience < 1:
            raise InvalidInput("restarts, max_iter and patience must be >= 1")
        if self.memory < 0:
            raise InvalidInput("memory must be >= 0")
        if not self.eps > 0 or not self.init_scale >= 0 or not self.broad_scale >= 0:
            raise InvalidInput("eps must be > 0 and the start scales >= 0")


class IterativeLogResult(NamedTuple):
    H: np.ndarray
    G: np.ndarray
    residual: float
    converged: bool
    iterations: int


def _solve_batch(Q: np.ndarray, sig: FlagSignature, G0: np.ndarray, max_iter: int, eps: float,
                 patience: int = 10, memory: int = 0) -> IterativeLogResult:
    """Run independent trials ``(Q[i], G0[i])`` in lockstep.

    Every field of the result carries a leading batch axis. Trials leave the
    batch as soon as they converge, fail or stall, so the stacked kernels
    only ever see live trials.
    """
    b, n, _ = Q.shape
    mask = sig.vertical_mask()
    vmask = mask.astype(float)
    hmask = 1.0 - vmask
    rows, cols = np.nonzero(np.tril(mask, -1))
    p, m = rows.size, memory
    x = G0[:, rows, cols].copy()
    H_out = np.zeros_like(Q)
    G_out = np.array(G0, dtype=float)
    resid = np.full(b, np.inf)
    conv = np.zeros(b, dtype=bool)
    iters = np.zeros(b, dtype=int)
    best = np.full(b, np.inf)
    prev = np.full(b, np.inf)
    stall = np.zeros(b, dtype=int)
    # Anderson history: newest entry last, ``count`` of them valid.
    Xh = np.zeros((b, m + 1, p))
    Fh = np.zeros((b, m + 1, p))
    count = np.zeros(b, dtype=int)
    active = np.arange(b)
    for it in range(1, max_iter + 1):
        if active.size == 0:
            break
        Qa = Q[active]
        G = np.zeros((active.size, n, n))
        G[:, rows, cols] = x[active]
        G -= np.swapaxes(G, 1, 2)
        H, ok = _logm_batch(Qa @ _expm_batch(-G))
        H *= hmask
        eH = _expm_batch(H)
        Gn, ok2 = _logm_batch(np.swapaxes(eH, 1, 2) @ Qa)
        Gn *= vmask
        ok &= ok2
        r = np.linalg.norm(Qa - eH @ _expm_batch(Gn), axis=(1, 2))
        r[~ok] = np.inf
        H_out[active] = H
        G_out[active] = Gn
        resid[active] = r
        iters[active] = it
        conv[active] = r < eps
        improved = r < best[active]
        best[active] = np.where(improved, r, best[active])
        stall[active] = np.where(improved, 0, stall[active] + 1)
        done = ~ok | (r < eps) | (stall[active] >= patience)
        keep = ~done
        a = active[keep]
        gx = Gn[keep][:, rows, cols]
        if m and a.size:
            xa = x[a]
            fa = gx - xa
            ra = r[keep]
            cnt = np.where(ra > prev[a], 0, count[a])
            prev[a] = ra
            Xh[a] = np.concatenate([Xh[a, 1:], xa[:, None]], axis=1)
            Fh[a] = np.concatenate([Fh[a, 1:], fa[:, None]], axis=1)
            cnt = np.minimum(cnt + 1, m + 1)
            count[a] = cnt
            valid = np.arange(m)[None, :] >= (m + 1 - cnt)[:, None]
            dF = np.diff(Fh[a], axis=1) * valid[..., None]
            dX = np.diff(Xh[a], axis=1) * valid[..., None]
            M = dF @ np.swapaxes(dF, 1, 2)
            # Tikhonov term keeps empty or collinear history columns harmless.
            reg = 1e-12 * np.trace(M, axis1=1, axis2=2) + 1e-300
            M += reg[:, None, None] * np.eye(m)
            gamma = np.linalg.solve(M, (dF @ fa[..., None]))[..., 0]
            x[a] = gx - np.einsum("bj,bjp->bp", gamma, dX + dF)
        else:
            x[a] = gx
        active = a
    return IterativeLogResult(H_out, G_out, resid, conv, iters)


def _solve(Q: np.ndarray, sig: FlagSignature, G0: np.ndarray, max_iter: int, eps: float,
           patience: int = 10, memory: int = 0) -> IterativeLogResult:
    out = _solve_batch(Q[None], sig, G0[None], max_iter, eps, patience, memory)
    return IterativeLogResult(out.H[0], out.G[0], float(out.residual[0]),
                              bool(out.converged[0]), int(out.iterations[0]))


def iterative_log(Q, sig, G0=None, max_iter: int = 100, eps: float = 1e-10,
                  patience: int = 10, memory: int = 0) -> IterativeLogResult:
    """Solve ``Q = expm(H) expm(G)`` by alternating projected logarithms.

    Starting from ``G0`` (zero if omitted), repeats::

        H <- horizontal part of logm(Q expm(-G))
        G <- vertical part of logm(expm(-H) Q)

    until ``||Q - expm(H) expm(G)||_F < eps`` or ``max_iter`` sweeps.
    A logarithm at the cut locus ends the trial with ``converged=False`` and
    an infinite residual, as does a residual that stalls for ``patience``
    consecutive sweeps. ``memory`` enables Anderson extrapolation as in
    :class:`SolverConfig`.
    """
    sig = _signature(sig)
    Q = _as_finite(Q)
    _check_dim(Q, sig)
    if max_iter < 1 or not eps > 0:
        raise InvalidInput("max_iter must be >= 1 and eps > 0")
    if G0 is None:
        G0 = np.zeros_like(Q)
    elif isinstance(G0, VerticalTangent):
        G0 = np.array(G0.G)
    else:
        G0 = project_vertical(G0, sig).G.copy()
    _check_dim(G0, sig)
    return _solve(Q, sig, G0, max_iter, eps, patience, memory)


def random_vertical(sig: FlagSignature, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Vertical matrix whose strict lower block entries are uniform on [-scale, scale]."""
    G = np.zeros((sig.n, sig.n))
    for blk in sig.blocks():
        m = blk.stop - blk.start
        if m < 2:
            continue
        low = np.tril(rng.uniform(-scale, scale, size=(m, m)), -1)
        G[blk, blk] = low - low.T
    return G


def _polar_log_blocks(Q: np.ndarray, blocks: list[slice], partial: bool) -> np.ndarray | None:
    G = np.zeros_like(Q)
    for blk in blocks:
        if blk.stop - blk.start < 2:
            continue
        U, _, Vt = np.linalg.svd(Q[blk, blk])
        if np.linalg.det(U) * np.linalg.det(Vt) < 0:
            # Nearest rotation: flip the pair with the smallest singular value.
            U[:, -1] = -U[:, -1]
        try:
            G[blk, blk] = logm_so(U @ Vt)
        except LogNearCutLocus:
            if not partial:
                return None
    return G


def aligned_vertical(Q: np.ndarray, sig: FlagSignature, coarse: bool = False) -> np.ndarray | None:
    """Vertical start that aligns the diagonal blocks of ``Q`` with the identity.

    Each diagonal block is replaced by its orthogonal polar factor and the
    block logarithms are assembled. Along a Grassmann geodesic from the
    identity the diagonal blocks of ``expm(H)`` are symmetric positive
    semidefinite, so there this recovers the exact vertical part. A block
    whose polar factor is a reflection uses the nearest rotation instead;
    blocks at the cut locus stay zero.

    With ``coarse=True`` the alignment uses the two blocks ``(k, n - k)``
    and the result is projected onto the vertical space of ``sig``; it is
    None if either coarse block cannot be aligned.
    """
    if coarse:
        k = sig.k
        G = _polar_log_blocks(Q, [slice(0, k), slice(k, sig.n)], partial=False)
        if G is not None:
            G[~sig.vertical_mask()] = 0.0
        return G
    return _polar_log_blocks(Q, sig.blocks(), partial=True)


def _initial_verticals(Qi: np.ndarray, sig: FlagSignature, cfg: SolverConfig,
                       rng: np.random.Generator):
    """Starting points for the trials on one representative.

    Order: zero, block-polar alignment, coarse alignment, then alternating
    broad random starts and small perturbations of the alignment. A start
    that is unavailable (cut locus, or coarse == fine for d = 2) is replaced
    by a broad random start.
    """
    aligned = None
    for trial in range(cfg.restarts):
        if trial == 0:
            yield np.zeros_like(Qi)
            continue
        if trial == 1:
            aligned = aligned_vertical(Qi, sig)
            G0 = aligned
        elif trial == 2:
            G0 = aligned_vertical(Qi, sig, coarse=True) if sig.d > 2 else None
        elif trial % 2 == 0 and aligned is not None:
            G0 = aligned + random_vertical(sig, rng, cfg.init_scale)
        else:
            G0 = None
        if G0 is None:
            G0 = random_vertical(sig, rng, cfg.broad_scale)
        yield G0


# Trials per stacked solver call; bounds memory for many restarts.
_CHUNK = 64


@dataclass(frozen=True, eq=False)
class GeodesicSolution:
    """Shortest geodesic found between two flags.

    ``H`` is the initial direction at the first point, ``G`` the vertical
    correction with ``Q_i ~ expm(H) expm(G)`` for representative
    ``representative_index`` of the relative rotation.
    """

    H: HorizontalTangent
    G: VerticalTangent
    distance: float
    representative_index: int
    residual: float
    converged: bool
    trials: int = 0
    converged_trials: int = 0


def _check_pair(P1: FlagPoint, P2: FlagPoint) -> None:
    if P1.signature != P2.signature:
        raise InvalidInput(f"signature mismatch: {P1.signature} vs {P2.signature}")


def flag_distance(P1: FlagPoint, P2: FlagPoint, cfg: SolverConfig | None = None) -> GeodesicSolution:
    """Geodesic distance between two flags and the direction that achieves it.

    The relative rotation ``Q = Q1^T Q2`` is expanded into its oriented
    representatives; each gets ``cfg.restarts`` solver trials (see
    :class:`SolverConfig` for the starting points). The converged
    trial with the shortest ``H`` wins, ties going to the earliest.

    Raises
    ------
    NoConvergedTrial
        If no trial converges.
    """
    cfg = cfg or SolverConfig()
    _check_pair(P1, P2)
    sig = P1.signature
    Q = P1.Q.T @ P2.Q
    rng = np.random.default_rng(cfg.seed)
    Qs, G0s, owner = [], [], []
    reps = _negate_first_columns(Q, sig)
    for idx, Qi in enumerate(reps):
        for G0 in _initial_verticals(Qi, sig, cfg, rng):
            Qs.append(Qi)
            G0s.append(G0)
            owner.append(idx)
    trials = len(Qs)
    Qs = np.stack(Qs)
    # Each trial solves for Q_i expm(-G0) from G = 0. The same class, but the
    # vertical logarithms are then taken near the identity, which keeps
    # solutions whose G has angles close to pi inside a usable basin.
    Qs = Qs @ _expm_batch(-np.stack(G0s))
    zeros = np.zeros((_CHUNK, sig.n, sig.n))
    results = [
        _solve_batch(Qs[i:i + _CHUNK], sig, zeros[: len(Qs[i:i + _CHUNK])], cfg.max_iter,
                     cfg.eps, cfg.patience, cfg.memory)
        for i in range(0, trials, _CHUNK)
    ]
    H = np.concatenate([r.H for r in results])
    residual = np.concatenate([r.residual for r in results])
    conv = np.concatenate([r.converged for r in results])
    n_conv = int(conv.sum())
    best = None
    best_len = math.inf
    for t in np.flatnonzero(conv):
        length = _length(H[t])
        if length < best_len:
            best_len = length
            best = t
    if best is None:
        raise NoConvergedTrial(f"none of {trials} solver trials converged (signature {sig})")
    Qb = reps[owner[best]]
    R = _expm_batch(-H[best][None])[0] @ Qb
    G = _logm_batch(R[None], cut_tol=0.0)[0][0] * sig.vertical_mask()
    return GeodesicSolution(
        H=HorizontalTangent(sig, H[best]),
        G=VerticalTangent(sig, G),
        distance=best_len,
        representative_index=owner[best],
        residual=float(residual[best]),
        converged=True,
        trials=trials,
        converged_trials=n_conv,
    )


class Reduction(NamedTuple):
    P1: FlagPoint
    P2: FlagPoint
    signature: FlagSignature
    basis: np.ndarray


def reduce_2k(P1: FlagPoint, P2: FlagPoint, rank_tol: float = 1e-8) -> Reduction:
    """Restate a distance problem in dimension 2k.

    With ``q`` the first k columns of ``Q1^T Q2``, every flag geodesic from
    ``[I]`` to ``[Q1^T Q2]`` stays inside ``span[I_{n,k}, q]`` provided the
    two k-frames meet only at zero. That span has an orthonormal basis ``U``
    (thin QR) and the problem becomes the one between ``U^T I_{n,k}`` and
    ``U^T q`` on the flag manifold with signature ``(n_1, ..., n_{d-1}, k)``.

    ``basis`` is ``Q1 @ U``: the first k columns of the original geodesic are
    ``basis`` times those of the reduced one (started at the identity).

    Raises
    ------
    NotApplicable
        If ``2k >= n``.
    RankDeficient
        If the trailing n-k rows of ``q`` have a singular value <= ``rank_tol``.
    """
    _check_pair(P1, P2)
    sig = P1.signature
    n, k = sig.n, sig.k
    if 2 * k >= n:
        raise NotApplicable(f"2k = {2 * k} >= n = {n}")
    q = P1.Q.T @ P2.Q[:, :k]
    smin = np.linalg.svd(q[k:], compute_uv=False)[-1]
    if not smin > rank_tol:
        raise RankDeficient(f"trailing block of the relative frame has singular value {smin:.3g}")
    U, _ = qr_thin(np.hstack([np.eye(n, k), q]))
    red = FlagSignature(sig.parts[:-1] + (k,))
    phi1 = U.T @ q
    # Polish the tiny loss of orthonormality from projecting onto U.
    phi1, _ = qr_thin(phi1)
    R1 = FlagPoint(red, np.eye(2 * k))
    R2 = FlagPoint(red, canonicalize(complete_frame(phi1), red))
    return Reduction(R1, R2, red, P1.Q @ U)


def fast_flag_distance(P1: FlagPoint, P2: FlagPoint, cfg: SolverConfig | None = None) -> GeodesicSolution:
    """``flag_distance`` through the 2k reduction when it applies.

    Falls back to the full n x n problem when ``2k >= n`` or the frames
    intersect. The returned tangents live in whichever dimension was used.
    """
    try:
        red = reduce_2k(P1, P2)
    except (NotApplicable, RankDeficient):
        return flag_distance(P1, P2, cfg)
    return flag_distance(red.P1, red.P2, cfg)
