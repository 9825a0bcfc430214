"""Grassmannian distance through principal angles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from flaggeo.errors import InvalidInput
from flaggeo.matfun import _as_finite, svd_compact


@dataclass(frozen=True, eq=False)
class GrassmannPoint:
    """A k-dimensional subspace of R^n given by an orthonormal basis."""

    X: np.ndarray = field(repr=False)

    def __post_init__(self):
        X = np.array(_as_finite(self.X, "basis"))
        n, k = X.shape
        if not 1 <= k <= n:
            raise InvalidInput(f"basis must be n x k with 1 <= k <= n, got {X.shape}")
        err = np.linalg.norm(X.T @ X - np.eye(k))
        if err > 1e-10:
            raise InvalidInput(f"orthonormality violated: ||X^T X - I||_F = {err:.3g}")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


def _basis(P) -> np.ndarray:
    return P.X if isinstance(P, GrassmannPoint) else GrassmannPoint(P).X


def principal_angles(P1, P2) -> np.ndarray:
    """Principal angles between two subspaces of equal dimension, ascending.

    Accepts :class:`GrassmannPoint` or orthonormal n x k arrays. Singular
    values of ``X1^T X2`` are clipped to [-1, 1] before ``arccos``, so
    angles below about 1e-8 are not resolved.
    """
    X1, X2 = _basis(P1), _basis(P2)
    if X1.shape != X2.shape:
        raise InvalidInput(f"basis shapes differ: {X1.shape} vs {X2.shape}")
    if X1.shape[1] == X1.shape[0]:
        # Gr(n, n) is a single point.
        return np.zeros(X1.shape[1])
    _, s, _ = svd_compact(X1.T @ X2)
    # Descending singular values give ascending angles.
    return np.arccos(np.clip(s, -1.0, 1.0))


def grassmann_distance(P1, P2) -> float:
    """Arc-length distance ``||theta||_2`` over the principal angles."""
    return float(np.linalg.norm(principal_angles(P1, P2)))
