"""Command-line interface: ``flaggeo <subcommand> ...``.

Exit codes are 0 on success, 1 for invalid input (bad files, violated
preconditions) and 2 when the solver finds no converged trial.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from flaggeo import dataio, embedding
from flaggeo.errors import FlagGeoError, InvalidInput, NoConvergedTrial
from flaggeo.flag import FlagPoint, SolverConfig, flag_distance, flag_exp, geodesic_length
from flaggeo.grassmann import GrassmannPoint, grassmann_distance

SEED_ENV = "FLAGGEO_SEED"


@dataclass(frozen=True)
class CliConfig:
    """Options shared by the numerical subcommands."""

    signature: tuple[int, ...] | None
    restarts: int
    max_iter: int
    eps: float
    seed: int
    method: str
    threads: int

    def solver(self) -> SolverConfig:
        return SolverConfig(restarts=self.restarts, max_iter=self.max_iter, eps=self.eps, seed=self.seed)


def _signature(text: str) -> tuple[int, ...]:
    try:
        parts = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad signature {text!r}: expected n1,n2,...") from None
    if not parts or any(p < 1 for p in parts):
        raise argparse.ArgumentTypeError(f"signature parts must be positive, got {text!r}")
    return parts


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise InvalidInput(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _config(args, need_signature: bool = True) -> CliConfig:
    if need_signature and getattr(args, "signature", None) is None:
        raise InvalidInput("--signature is required")
    return CliConfig(
        signature=getattr(args, "signature", None),
        restarts=args.restarts if args.restarts is not None else 5,
        max_iter=args.max_iter if args.max_iter is not None else 100,
        eps=args.eps if args.eps is not None else 1e-10,
        seed=_resolve_seed(args.seed),
        method=getattr(args, "method", "flag"),
        threads=args.threads if args.threads is not None else (os.cpu_count() or 1),
    )


def _point(path: str, signature) -> FlagPoint:
    return FlagPoint.from_matrix(dataio.load_csv(path).values, signature)


def _write_rows(path: Path, values: np.ndarray, labels=None) -> None:
    dataio.save_csv(dataio.DataMatrix(np.atleast_2d(values), column_labels=labels), path)


def cmd_distance(args) -> int:
    cfg = _config(args)
    t0 = time.perf_counter()
    P1, P2 = _point(args.a, cfg.signature), _point(args.b, cfg.signature)
    if cfg.method == "grassmann":
        d = grassmann_distance(GrassmannPoint(P1.frame()), GrassmannPoint(P2.frame()))
        print(f"distance: {d:.17g}")
        print(f"time: {time.perf_counter() - t0:.6f} s")
        return 0
    sol = flag_distance(P1, P2, cfg.solver())
    print(f"distance: {sol.distance:.17g}")
    print(f"representative: {sol.representative_index}")
    print(f"residual: {sol.residual:.3e}")
    print(f"converged: {str(sol.converged).lower()}")
    print(f"trials: {sol.converged_trials}/{sol.trials} converged")
    print(f"time: {time.perf_counter() - t0:.6f} s")
    return 0


def cmd_geodesic(args) -> int:
    cfg = _config(args)
    P1, P2 = _point(args.a, cfg.signature), _point(args.b, cfg.signature)
    sol = flag_distance(P1, P2, cfg.solver())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = len(str(args.steps))
    for i in range(args.steps + 1):
        Pt = flag_exp(P1, sol.H, i / args.steps)
        _write_rows(out / f"step_{i:0{width}d}.csv", Pt.Q)
    print(f"distance: {geodesic_length(sol.H):.17g}")
    print(f"wrote {args.steps + 1} matrices to {out}")
    return 0


def cmd_distmat(args) -> int:
    cfg = _config(args)
    mats = [dataio.load_csv(p).values for p in args.inputs]
    labels = args.labels.split(",") if args.labels else [Path(p).stem for p in args.inputs]
    if len(labels) != len(mats):
        raise InvalidInput(f"{len(labels)} labels for {len(mats)} inputs")
    points = [FlagPoint.from_matrix(M, cfg.signature) for M in mats]
    D = embedding.pairwise_distances(points, cfg.method, cfg.solver(), labels, workers=cfg.threads)
    _write_rows(Path(args.out), D.values, D.labels)
    print(f"wrote {D.p}x{D.p} {cfg.method} distance matrix to {args.out}")
    return 0


def cmd_mds(args) -> int:
    M = dataio.load_csv(args.matrix)
    res = embedding.classical_mds(M.values, args.dim)
    _write_rows(Path(args.out), res.coordinates.T, M.column_labels)
    if args.eigenvalues:
        _write_rows(Path(args.eigenvalues), res.eigenvalues[None, :])
    print(f"wrote {res.coordinates.shape[0]} points in {args.dim} dimensions to {args.out}")
    return 0


def run_pipeline(spec: dataio.ExperimentSpec, cfg: SolverConfig, out: Path, workers: int = 1) -> dict:
    """Build the experiment's point sets, embed them with both methods and report.

    Writes ``distances_<method>.csv``, ``coords_<method>.csv`` and
    ``eigenvalues_<method>.csv`` for the flag and Grassmann methods, plus
    ``report.json``. Coordinate and distance files list one point per column
    under a header of set labels.
    """
    out.mkdir(parents=True, exist_ok=True)
    points, labels = dataio.experiment_points(spec)
    report = {"signature": list(points[0].signature.parts), "k": spec.k,
              "sets": len(points), "seed": cfg.seed, "methods": {}}
    for method in ("flag", "grassmann"):
        D = embedding.pairwise_distances(points, method, cfg, labels, workers=workers)
        mds = embedding.classical_mds(D, 2)
        _write_rows(out / f"distances_{method}.csv", D.values, labels)
        _write_rows(out / f"coords_{method}.csv", mds.coordinates.T, labels)
        _write_rows(out / f"eigenvalues_{method}.csv", mds.eigenvalues[None, :])
        report["methods"][method] = embedding.separation_report(mds.coordinates, labels, D) \
            if len(set(labels)) == 2 else {}
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def cmd_pipeline(args) -> int:
    cfg = _config(args, need_signature=False)
    try:
        with open(args.spec) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"$: invalid JSON ({exc})") from None
    spec = dataio.ExperimentSpec.from_dict(data, base_dir=Path(args.spec).parent)
    solver = dict(restarts=5, max_iter=100, eps=1e-10)
    solver.update(spec.solver)
    for key in solver:
        if getattr(args, key) is not None:
            solver[key] = getattr(args, key)
    # Precedence: --seed, then the environment, then the experiment file.
    if args.seed is None and not os.environ.get(SEED_ENV, "").strip():
        seed = spec.seed
    else:
        seed = cfg.seed
    report = run_pipeline(spec, SolverConfig(seed=seed, **solver), Path(args.out), cfg.threads)
    for method, r in report["methods"].items():
        if r:
            print(f"{method}: silhouette {r['silhouette']:.4f}, separable {r['linearly_separable']}, "
                  f"inter/intra {r['inter_intra_ratio']:.4f}")
    print(f"wrote results to {args.out}")
    return 0


def cmd_gen(args) -> int:
    seed = _resolve_seed(args.seed)
    shape = args.axes if args.kind == "ellipsoid" else args.scales
    if not shape:
        raise InvalidInput(f"gen {args.kind} needs --{'axes' if args.kind == 'ellipsoid' else 'scales'}")
    n = args.n if args.n is not None else len(shape)
    if n < len(shape):
        raise InvalidInput(f"--n must be at least {len(shape)}")
    frame = dataio.random_frame(n, len(shape), args.frame_seed) if args.frame_seed is not None else np.eye(n, len(shape))
    gen = dataio.gen_ellipsoid if args.kind == "ellipsoid" else dataio.gen_gaussian
    X = gen(shape, args.p, frame, args.noise, seed)
    dataio.save_csv(X, args.out)
    print(f"wrote {X.n}x{X.p} samples to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--restarts", type=_positive_int, help="trials per representative (default 5)")
    solver.add_argument("--max-iter", dest="max_iter", type=_positive_int, help="sweeps per trial (default 100)")
    solver.add_argument("--eps", type=_positive_float, help="residual tolerance (default 1e-10)")
    solver.add_argument("--seed", type=int, help=f"random seed (default ${SEED_ENV} or 0)")
    solver.add_argument("--threads", type=_positive_int, help="worker processes (default: all cores)")
    sig = argparse.ArgumentParser(add_help=False)
    sig.add_argument("--signature", type=_signature, help="block sizes n1,n2,... (leading parts or full)")
    method = argparse.ArgumentParser(add_help=False)
    method.add_argument("--method", choices=embedding.METHODS, default="flag")

    p = argparse.ArgumentParser(prog="flaggeo", description="Flag manifold geodesic distances.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("distance", parents=[sig, solver, method], help="distance between two flags")
    s.add_argument("a")
    s.add_argument("b")
    s.set_defaults(func=cmd_distance)

    s = sub.add_parser("geodesic", parents=[sig, solver], help="sample the shortest geodesic")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--steps", type=_positive_int, default=10)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_geodesic)

    s = sub.add_parser("distmat", parents=[sig, solver, method], help="pairwise distance matrix")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--labels", help="comma-separated labels (default: file stems)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_distmat)

    s = sub.add_parser("mds", help="classical MDS of a distance matrix CSV")
    s.add_argument("matrix")
    s.add_argument("--dim", type=_positive_int, default=2)
    s.add_argument("--out", required=True)
    s.add_argument("--eigenvalues", help="also write all eigenvalues here")
    s.set_defaults(func=cmd_mds)

    s = sub.add_parser("pipeline", parents=[solver], help="run a JSON experiment spec")
    s.add_argument("spec")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("gen", help="generate synthetic samples")
    s.add_argument("kind", choices=["ellipsoid", "gaussian"])
    s.add_argument("--axes", type=_floats, help="ellipsoid semi-axes, non-increasing")
    s.add_argument("--scales", type=_floats, help="gaussian standard deviations")
    s.add_argument("--p", type=_positive_int, default=100, help="sample count")
    s.add_argument("--n", type=_positive_int, help="ambient dimension (default: number of axes)")
    s.add_argument("--frame-seed", dest="frame_seed", type=int, help="random orthonormal frame seed")
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoConvergedTrial as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InvalidInput, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FlagGeoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
