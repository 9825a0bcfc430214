"""Data matrices, SVD-basis flags, synthetic generators and CSV files.

Samples are stored as columns: a data matrix is n x p for p samples in R^n.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from flaggeo.errors import (
    DegenerateSpectrum,
    DegenerateSpectrumWarning,
    InvalidInput,
    ParseError,
    RankTooLow,
)
from flaggeo.flag import FlagPoint, FlagSignature, _parts
from flaggeo.matfun import _as_finite, svd_compact

# Singular values closer than this (relative to the largest) count as tied.
GAP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An n x p block of samples, one per column.

    ``class_label`` tags the whole matrix; ``column_labels`` optionally
    names each sample (the CSV header row).
    """

    values: np.ndarray = field(repr=False)
    class_label: str | None = None
    column_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.array(self.values, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidInput(f"data matrix must be 2-D and non-empty, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidInput("data matrix has non-finite entries")
        if self.column_labels is not None:
            labels = tuple(str(c) for c in self.column_labels)
            if len(labels) != X.shape[1]:
                raise InvalidInput(f"{len(labels)} column labels for {X.shape[1]} columns")
            object.__setattr__(self, "column_labels", labels)
        X.setflags(write=False)
        object.__setattr__(self, "values", X)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def _values(X) -> np.ndarray:
    return X.values if isinstance(X, DataMatrix) else DataMatrix(X).values


def _like(X, values: np.ndarray, **changes) -> DataMatrix:
    if isinstance(X, DataMatrix):
        kw = dict(class_label=X.class_label, column_labels=X.column_labels)
        kw.update(changes)
        return DataMatrix(values, **kw)
    return DataMatrix(values, **changes)


def center(X) -> DataMatrix:
    """Subtract the mean sample from every sample."""
    V = _values(X)
    return _like(X, V - V.mean(axis=1, keepdims=True))


def _check_gaps(s: np.ndarray, boundaries: Sequence[int], k: int) -> None:
    tol = GAP_TOL * max(float(s[0]), np.finfo(float).tiny)
    for b in boundaries:
        if b < len(s) and s[b - 1] - s[b] <= tol:
            raise DegenerateSpectrum(
                f"singular values {b} and {b + 1} are tied ({s[b - 1]:.6g}, {s[b]:.6g}) "
                "across a flag block boundary")
    inside = [i for i in range(1, k) if i not in boundaries and s[i - 1] - s[i] <= tol]
    if inside:
        warnings.warn(f"tied singular values inside a flag block at positions {inside}",
                      DegenerateSpectrumWarning, stacklevel=3)


def svd_flag(X, signature) -> FlagPoint:
    """Flag spanned by the leading left singular vectors of ``X``.

    ``signature`` is either the leading parts (summing to k) or a full
    signature summing to n. The first k left singular vectors, in
    descending singular-value order, are completed to an n x n rotation.

    Raises
    ------
    RankTooLow
        If ``X`` has rank below k.
    DegenerateSpectrum
        If singular values tie across a block boundary, including the one
        between positions k and k + 1. Ties inside a block only warn with
        :class:`DegenerateSpectrumWarning`.
    """
    V = _values(X)
    n, p = V.shape
    parts = _parts(signature)
    if sum(parts) == n and len(parts) >= 2:
        parts = parts[:-1]
    k = sum(parts)
    if not parts or any(q < 1 for q in parts) or k >= n:
        raise InvalidInput(f"signature {signature} does not fit ambient dimension {n}")
    U, s, _ = svd_compact(V)
    rank = int(np.sum(s > max(n, p) * np.finfo(float).eps * (s[0] if s.size else 0.0)))
    if rank < k:
        raise RankTooLow(f"data has rank {rank}, need at least k = {k}")
    boundaries = list(np.cumsum(parts))
    _check_gaps(s, boundaries, k)
    return FlagPoint.from_matrix(U[:, :k], parts)


def select_bands(X, indices: Sequence[int]) -> DataMatrix:
    """Rows (bands) of ``X`` at the given 0-based indices, in the given order."""
    V = _values(X)
    idx = np.asarray(indices)
    if idx.ndim != 1 or idx.size == 0 or not np.issubdtype(idx.dtype, np.integer):
        raise InvalidInput("band indices must be a non-empty list of integers")
    if idx.min() < 0 or idx.max() >= V.shape[0]:
        raise InvalidInput(f"band index out of range for {V.shape[0]} rows")
    if len(set(idx.tolist())) != idx.size:
        raise InvalidInput("band indices must be distinct")
    return _like(X, V[idx])


def _frame(frame, n: int, d: int) -> np.ndarray:
    if frame is None:
        return np.eye(n, d)
    F = np.asarray(frame, dtype=float)
    if F.shape != (n, d) and F.shape[0] != F.shape[1]:
        raise InvalidInput(f"frame has shape {F.shape}")
    F = F[:, :d]
    if np.linalg.norm(F.T @ F - np.eye(d)) > 1e-10:
        raise InvalidInput("orthonormality violated: frame columns are not orthonormal")
    return F


def gen_ellipsoid(axes: Sequence[float], p: int, frame=None, noise: float = 0.0,
                  seed: int = 0, label: str | None = None) -> DataMatrix:
    """Points ``frame @ diag(axes) @ u`` for u uniform on the unit sphere.

    Directions are normalized Gaussian vectors. ``frame`` is an n x d matrix
    with orthonormal columns (identity if omitted, n = d); Gaussian noise of
    standard deviation ``noise`` is added to every coordinate.
    """
    a = np.asarray(axes, dtype=float)
    if a.ndim != 1 or a.size < 1 or np.any(a <= 0) or np.any(np.diff(a) > 0):
        raise InvalidInput("axes must be positive and non-increasing")
    if p < 1 or noise < 0:
        raise InvalidInput("need p >= 1 and noise >= 0")
    d = a.size
    n = d if frame is None else np.asarray(frame).shape[0]
    F = _frame(frame, n, d)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((d, p))
    u /= np.linalg.norm(u, axis=0)
    X = F @ (a[:, None] * u)
    if noise:
        X = X + noise * rng.standard_normal(X.shape)
    return DataMatrix(X, class_label=label)


def random_frame(n: int, d: int, seed: int) -> np.ndarray:
    """n x d matrix with Haar-distributed orthonormal columns."""
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, d)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def gen_gaussian(scales: Sequence[float], p: int, frame=None, noise: float = 0.0,
                 seed: int = 0, label: str | None = None, mean: Sequence[float] | None = None) -> DataMatrix:
    """Gaussian samples ``frame @ (mean + diag(scales) @ z)`` plus isotropic noise.

    ``mean`` is given in frame coordinates and defaults to zero. Two pools
    sharing ``frame`` but with permuted ``scales`` (or means) span the same
    dominant subspace while ordering its directions differently.
    """
    sc = np.asarray(scales, dtype=float)
    if sc.ndim != 1 or sc.size < 1 or np.any(sc < 0):
        raise InvalidInput("scales must be a non-empty list of nonnegative numbers")
    mu = np.zeros(sc.size) if mean is None else _as_finite(mean, "mean", ndim=1)
    if mu.shape != sc.shape:
        raise InvalidInput(f"mean needs {sc.size} entries, got shape {mu.shape}")
    if p < 1 or noise < 0:
        raise InvalidInput("need p >= 1 and noise >= 0")
    d = sc.size
    n = d if frame is None else np.asarray(frame).shape[0]
    F = _frame(frame, n, d)
    rng = np.random.default_rng(seed)
    X = F @ (mu[:, None] + sc[:, None] * rng.standard_normal((d, p)))
    if noise:
        X = X + noise * rng.standard_normal(X.shape)
    return DataMatrix(X, class_label=label)


def gen_mixture(major, minor, m: int, q: int, sets: int, seed: int = 0,
                label: str | None = None) -> list[DataMatrix]:
    """Sets of ``m`` columns from ``major`` followed by ``q`` from ``minor``.

    Columns are drawn without replacement across all sets, so no pool
    column appears twice.

    Raises
    ------
    InvalidInput
        If a pool has fewer columns than the sets need.
    """
    A, B = _values(major), _values(minor)
    if A.shape[0] != B.shape[0]:
        raise InvalidInput(f"pools have different dimensions: {A.shape[0]} vs {B.shape[0]}")
    if m < 0 or q < 0 or m + q < 1 or sets < 1:
        raise InvalidInput("need m, q >= 0, m + q >= 1 and sets >= 1")
    if m * sets > A.shape[1] or q * sets > B.shape[1]:
        raise InvalidInput(
            f"pool exhausted: need {m * sets} major and {q * sets} minor columns, "
            f"have {A.shape[1]} and {B.shape[1]}")
    rng = np.random.default_rng(seed)
    ia = rng.permutation(A.shape[1])[: m * sets].reshape(sets, m)
    ib = rng.permutation(B.shape[1])[: q * sets].reshape(sets, q)
    if label is None:
        label = f"{_name(major)}+{_name(minor)}" if q else _name(major)
    return [DataMatrix(np.hstack([A[:, ia[s]], B[:, ib[s]]]), class_label=label)
            for s in range(sets)]


def _name(X) -> str:
    if isinstance(X, DataMatrix) and X.class_label is not None:
        return X.class_label
    return "?"


def save_csv(X, path) -> None:
    """Write one sample per column with 17 significant digits.

    A header row is written when the matrix has column labels.
    """
    V = _values(X)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(X, DataMatrix) and X.column_labels is not None:
            w.writerow(X.column_labels)
        for row in V:
            w.writerow([format(v, ".17g") for v in row])


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label: str | None = None) -> DataMatrix:
    """Read a rectangular numeric CSV, one sample per column.

    A first row with any non-numeric cell is taken as column labels.

    Raises
    ------
    ParseError
        On ragged rows, non-numeric or non-finite cells, or an empty file,
        with the 1-based line number.
    """
    rows: list[list[float]] = []
    header = None
    width = None
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            cells = [c.strip() for c in raw]
            if header is None and not rows and not all(_is_number(c) for c in cells):
                header = tuple(cells)
                width = len(cells)
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ParseError(f"expected {width} fields, found {len(cells)}", line=lineno)
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                bad = next(c for c in cells if not _is_number(c))
                raise ParseError(f"non-numeric cell {bad!r}", line=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError("non-finite cell", line=lineno)
            rows.append(vals)
    if not rows:
        raise ParseError(f"no numeric rows in {Path(path).name}")
    return DataMatrix(np.array(rows), class_label=label, column_labels=header)


SPEC_SCHEMA = {
    "type": "object",
    "required": ["signature", "k", "classes", "m", "q", "sets"],
    "additionalProperties": False,
    "properties": {
        "signature": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "k": {"type": "integer", "minimum": 1},
        "classes": {
            "type": "array",
            "minItems": 2,
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "path": {"type": "string"},
                    "generator": {"enum": ["gaussian", "ellipsoid"]},
                    "params": {"type": "object"},
                },
                "oneOf": [{"required": ["path"]}, {"required": ["generator", "params"]}],
            },
        },
        "m": {"type": "integer", "minimum": 0},
        "q": {"type": "integer", "minimum": 0},
        "sets": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "center": {"enum": ["global", "set", "none"]},
        "bands": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "restarts": {"type": "integer", "minimum": 1},
                "max_iter": {"type": "integer", "minimum": 1},
                "eps": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}

_GEN_PARAMS = {
    "gaussian": {"n", "p", "scales", "mean", "frame_seed", "noise", "seed"},
    "ellipsoid": {"n", "p", "axes", "frame_seed", "noise", "seed"},
}


@dataclass(frozen=True)
class ClassSource:
    name: str
    path: str | None = None
    generator: str | None = None
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentSpec:
    """A mixture experiment: pools per class, set sizes, signature and seed.

    Each class in turn is the major class of ``sets`` sets, with the next
    class (cyclically) as the minor one. ``signature`` holds the leading
    parts, which sum to ``k``.
    """

    signature: tuple[int, ...]
    k: int
    classes: tuple[ClassSource, ...]
    m: int
    q: int
    sets: int
    seed: int = 0
    center: str = "global"
    bands: tuple[int, ...] | None = None
    solver: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path | None = None) -> "ExperimentSpec":
        """Validate a parsed JSON spec.

        Relative class paths resolve against ``base_dir``. Errors name the
        JSON path of the offending field.
        """
        import jsonschema

        validator = jsonschema.Draft202012Validator(SPEC_SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
        if errors:
            e = errors[0]
            raise InvalidInput(f"{e.json_path}: {e.message}")
        classes = []
        for i, c in enumerate(data["classes"]):
            params = dict(c.get("params", {}))
            if "generator" in c:
                unknown = set(params) - _GEN_PARAMS[c["generator"]]
                if unknown:
                    raise InvalidInput(f"$.classes[{i}].params: unknown keys {sorted(unknown)}")
            path = c.get("path")
            if path is not None and base_dir is not None:
                path = str(Path(base_dir) / path)
            classes.append(ClassSource(c["name"], path, c.get("generator"), params))
        if len({c.name for c in classes}) != len(classes):
            raise InvalidInput("$.classes: class names must be distinct")
        k = data["k"]
        sig = tuple(data["signature"])
        if sum(sig) != k:
            if len(sig) >= 2 and sum(sig[:-1]) == k:
                sig = sig[:-1]
            else:
                raise InvalidInput(f"$.signature: leading parts must sum to k = {k}")
        if data["m"] + data["q"] < k:
            raise InvalidInput(f"$.m: each set has {data['m'] + data['q']} samples, need >= k = {k}")
        return cls(sig, k, tuple(classes), data["m"], data["q"], data["sets"],
                   data.get("seed", 0), data.get("center", "global"),
                   tuple(data["bands"]) if "bands" in data else None, dict(data.get("solver", {})))


def _pool(src: ClassSource) -> DataMatrix:
    if src.path is not None:
        return load_csv(src.path, label=src.name)
    P = dict(src.params)
    try:
        p = int(P["p"])
        if src.generator == "gaussian":
            scales = P["scales"]
            n = int(P.get("n", len(scales)))
            frame = random_frame(n, len(scales), int(P.get("frame_seed", 0)))
            return gen_gaussian(scales, p, frame, float(P.get("noise", 0.0)),
                                int(P.get("seed", 0)), src.name, P.get("mean"))
        axes = P["axes"]
        n = int(P.get("n", len(axes)))
        frame = random_frame(n, len(axes), int(P.get("frame_seed", 0)))
        return gen_ellipsoid(axes, p, frame, float(P.get("noise", 0.0)), int(P.get("seed", 0)), src.name)
    except KeyError as exc:
        raise InvalidInput(f"class {src.name!r}: missing generator parameter {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"class {src.name!r}: bad generator parameters ({exc})") from None


def build_sets(spec: ExperimentSpec) -> list[DataMatrix]:
    """Load or generate every pool and cut it into labeled mixture sets.

    Pools are band-selected, then centered by the mean of all pooled samples
    when ``spec.center == "global"``. Each pool is shuffled once and split
    between its major and minor uses, so no column is drawn twice.
    Per-set centering happens after mixing.
    """
    pools = [_pool(c) for c in spec.classes]
    if len({P.n for P in pools}) != 1:
        raise InvalidInput("class pools have different dimensions")
    if spec.bands is not None:
        pools = [select_bands(P, spec.bands) for P in pools]
    if spec.center == "global":
        mean = np.hstack([P.values for P in pools]).mean(axis=1, keepdims=True)
        pools = [_like(P, P.values - mean) for P in pools]
    ss = np.random.SeedSequence(spec.seed)
    shuffle_seeds = ss.spawn(len(pools))
    major_part, minor_part = [], []
    for P, s in zip(pools, shuffle_seeds):
        need = (spec.m + spec.q) * spec.sets
        if need > P.p:
            raise InvalidInput(f"pool {P.class_label!r} exhausted: need {need} columns, have {P.p}")
        perm = np.random.default_rng(s).permutation(P.p)
        cut = spec.m * spec.sets
        major_part.append(_like(P, P.values[:, perm[:cut]], column_labels=None))
        # With q == 0 the minor part is never sampled; keep a non-empty placeholder.
        minor = perm[cut:need] if spec.q else perm[:cut]
        minor_part.append(_like(P, P.values[:, minor], column_labels=None))
    out: list[DataMatrix] = []
    c = len(pools)
    mix_seeds = ss.spawn(c)
    for i in range(c):
        major = major_part[i]
        minor = minor_part[(i + 1) % c]
        sets = gen_mixture(major, minor, spec.m, spec.q, spec.sets,
                           seed=int(mix_seeds[i].generate_state(1)[0]),
                           label=spec.classes[i].name)
        if spec.center == "set":
            sets = [center(S) for S in sets]
        out.extend(sets)
    return out


def experiment_points(spec: ExperimentSpec) -> tuple[list[FlagPoint], list[str]]:
    """SVD-basis flag points of every set, with the set labels."""
    sets = build_sets(spec)
    n = sets[0].n
    if spec.k >= n:
        raise InvalidInput(f"k = {spec.k} must be below the ambient dimension {n}")
    sig = FlagSignature.from_leading(spec.signature, n)
    return [svd_flag(S, sig) for S in sets], [S.class_label for S in sets]
