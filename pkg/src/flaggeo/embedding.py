"""Pairwise distance matrices and classical multidimensional scaling."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from flaggeo.errors import InvalidInput, NoConvergedTrial
from flaggeo.flag import FlagPoint, SolverConfig, fast_flag_distance
from flaggeo.grassmann import GrassmannPoint, grassmann_distance
from flaggeo.matfun import _as_finite

METHODS = ("flag", "grassmann")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric, hollow, nonnegative p x p matrix of manifold distances.

    ``method`` is "flag" (with ``signature``) or "grassmann" (with ``k``).
    """

    values: np.ndarray = field(repr=False)
    labels: tuple = ()
    method: str = "flag"
    signature: tuple[int, ...] | None = None
    k: int | None = None

    def __post_init__(self):
        D = np.array(_as_finite(self.values, "distance matrix"))
        p = D.shape[0]
        if D.shape != (p, p) or p < 1:
            raise InvalidInput(f"distance matrix must be square, got {D.shape}")
        if np.any(D < 0):
            raise InvalidInput("distance matrix has negative entries")
        if np.any(np.diag(D) != 0):
            raise InvalidInput("distance matrix diagonal must be zero")
        if np.max(np.abs(D - D.T), initial=0.0) > 1e-6:
            raise InvalidInput("distance matrix is not symmetric")
        if self.method not in METHODS:
            raise InvalidInput(f"method must be one of {METHODS}, got {self.method!r}")
        labels = tuple(self.labels) if self.labels is not None else ()
        if labels and len(labels) != p:
            raise InvalidInput(f"{len(labels)} labels for {p} points")
        D.setflags(write=False)
        object.__setattr__(self, "values", D)
        object.__setattr__(self, "labels", labels)

    @property
    def p(self) -> int:
        return self.values.shape[0]


def pair_seed(seed: int, i: int, j: int) -> int:
    """Solver seed for pair (i, j), independent of evaluation order."""
    return int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0])


def _pair_distance(args) -> float:
    method, a, b, cfg = args
    if method == "grassmann":
        return grassmann_distance(a, b)
    return fast_flag_distance(a, b, cfg).distance


def _check_points(points: Sequence, method: str) -> list:
    if method not in METHODS:
        raise InvalidInput(f"method must be one of {METHODS}, got {method!r}")
    if len(points) < 2:
        raise InvalidInput("need at least 2 points")
    if method == "flag":
        if not all(isinstance(P, FlagPoint) for P in points):
            raise InvalidInput("flag method needs FlagPoint inputs")
        sigs = {P.signature for P in points}
        if len(sigs) != 1:
            raise InvalidInput(f"points have mixed signatures: {sorted(map(str, sigs))}")
        return list(points)
    out = []
    for P in points:
        if isinstance(P, FlagPoint):
            P = GrassmannPoint(P.frame())
        elif not isinstance(P, GrassmannPoint):
            P = GrassmannPoint(P)
        out.append(P)
    if len({P.X.shape for P in out}) != 1:
        raise InvalidInput("points have mixed shapes")
    return out


def pairwise_distances(points: Sequence, method: str = "flag", cfg: SolverConfig | None = None,
                       labels: Sequence | None = None, workers: int = 1) -> DistanceMatrix:
    """Distance matrix over a list of points.

    Only the upper triangle is computed; the result is symmetrized and its
    diagonal zeroed. Flag distances go through the 2k reduction when it
    applies. Pair (i, j) uses solver seed ``pair_seed(cfg.seed, i, j)``, so
    the matrix does not depend on ``workers``.

    For ``method="grassmann"`` the points may be flag points (their leading
    k-frames are used), Grassmann points or orthonormal arrays.

    Raises
    ------
    NoConvergedTrial
        With ``pair = (i, j)`` set, for the first failing pair in
        row-major order.
    """
    cfg = cfg or SolverConfig()
    pts = _check_points(points, method)
    p = len(pts)
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    jobs = [(method, pts[i], pts[j], dataclasses.replace(cfg, seed=pair_seed(cfg.seed, i, j)))
            for i, j in pairs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_pair_distance, job) for job in jobs]
            results = [_collect(f.result, pair) for f, pair in zip(futures, pairs)]
    else:
        results = [_collect(lambda job=job: _pair_distance(job), pair) for job, pair in zip(jobs, pairs)]
    D = np.zeros((p, p))
    for (i, j), d in zip(pairs, results):
        D[i, j] = d
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    if method == "flag":
        meta = dict(signature=pts[0].signature.parts, k=pts[0].signature.k)
    else:
        meta = dict(k=pts[0].k)
    return DistanceMatrix(D, tuple(labels) if labels is not None else (), method, **meta)


def _collect(get, pair):
    try:
        return get()
    except NoConvergedTrial as exc:
        raise NoConvergedTrial(f"pair {pair}: {exc}", pair=pair) from exc


@dataclass(frozen=True, eq=False)
class MdsResult:
    """Classical MDS output.

    ``coordinates`` is p x m. ``eigenvalues`` lists every eigenvalue of the
    double-centered matrix, descending and signed.
    """

    coordinates: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)


def classical_mds(D, m: int = 2) -> MdsResult:
    """Torgerson scaling of a distance matrix into R^m.

    ``B = -1/2 J (D*D) J`` with the centering ``J = I - 11^T/p`` is
    diagonalized. Coordinates are the top m eigenvectors scaled by the
    square roots of their eigenvalues; a non-positive eigenvalue among
    the top m contributes a zero column. Eigenvector signs follow the
    largest-magnitude-entry-positive rule.
    """
    values = D.values if isinstance(D, DistanceMatrix) else DistanceMatrix(np.asarray(D, dtype=float)).values
    p = values.shape[0]
    if not 1 <= m < p:
        raise InvalidInput(f"target dimension must satisfy 1 <= m < p = {p}, got {m}")
    J = np.eye(p) - 1.0 / p
    B = -0.5 * J @ (values * values) @ J
    B = 0.5 * (B + B.T)
    w, V = np.linalg.eigh(B)
    w, V = w[::-1], V[:, ::-1]
    idx = np.argmax(np.abs(V), axis=0)
    V = V * np.where(V[idx, np.arange(p)] < 0, -1.0, 1.0)
    scale = np.sqrt(np.clip(w[:m], 0.0, None))
    return MdsResult(V[:, :m] * scale, w.copy())


def perceptron_separable(X: np.ndarray, y: np.ndarray, max_updates: int = 10_000) -> bool:
    """True if the perceptron separates labels ``y`` (+-1) within ``max_updates``.

    Points are standardized and given a bias coordinate; passes run in
    index order, so the answer is deterministic.
    """
    X = np.asarray(X, dtype=float)
    scale = X.std(axis=0)
    Z = (X - X.mean(axis=0)) / np.where(scale > 0, scale, 1.0)
    Z = np.hstack([Z, np.ones((len(Z), 1))])
    w = np.zeros(Z.shape[1])
    updates = 0
    while updates < max_updates:
        mistakes = 0
        for z, t in zip(Z, y):
            if t * (z @ w) <= 0:
                w += t * z
                updates += 1
                mistakes += 1
                if updates >= max_updates:
                    break
        if mistakes == 0:
            return True
    return False


def separation_report(coords: np.ndarray, labels: Sequence, D=None) -> dict:
    """Class-separation statistics of a two-class embedding.

    Keys: ``silhouette`` (Euclidean, on ``coords``), ``centroid_gap``
    (distance between the two class centroids over the mean within-class
    spread around them), ``linearly_separable`` (perceptron within 10^4
    updates) and, when the distance matrix ``D`` is given,
    ``mean_inter``, ``mean_intra`` and their ratio.
    """
    from sklearn.metrics import silhouette_score

    coords = np.asarray(coords, dtype=float)
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) != 2:
        raise InvalidInput(f"separation report needs exactly 2 classes, got {classes}")
    a, b = (labels == c for c in classes)
    ca, cb = coords[a].mean(axis=0), coords[b].mean(axis=0)
    spread = np.concatenate([np.linalg.norm(coords[a] - ca, axis=1),
                             np.linalg.norm(coords[b] - cb, axis=1)]).mean()
    y = np.where(a, 1.0, -1.0)
    out = {
        "classes": classes,
        "silhouette": float(silhouette_score(coords, labels)),
        "centroid_gap": float(np.linalg.norm(ca - cb) / spread) if spread > 0 else float("inf"),
        "linearly_separable": perceptron_separable(coords, y),
    }
    if D is not None:
        V = D.values if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
        same = labels[:, None] == labels[None, :]
        off = ~np.eye(len(labels), dtype=bool)
        intra = float(V[same & off].mean())
        inter = float(V[~same].mean())
        out.update(mean_inter=inter, mean_intra=intra,
                   inter_intra_ratio=inter / intra if intra > 0 else float("inf"))
    return out
