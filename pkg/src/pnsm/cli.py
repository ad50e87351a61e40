"""Command-line interface: ``pnsm simulate | fit | pca | metrics | filter | replay``.

Every command writes a JSON run manifest next to its outputs holding the
exact argument vector and the resolved configuration; ``pnsm replay
MANIFEST`` reruns it and reproduces the outputs byte for byte.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.
"""

import argparse
import json
import logging
import os
import re
import sys
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cloud import PointCloud, read_cloud, write_cloud, write_csv
from .embeddings import EmbeddingSpec
from .errors import FitFailure, PNSMError
from .generators import ALL_CASES, ScenarioSpec, generate
from .metrics import CUMULATIVE, DEFAULT_K, STEPWISE, metric_sweep, outlier_filter
from .projection import FitConfig, embed_input, fit_nested, pca_projection

logger = logging.getLogger("pnsm")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
THREADS_ENV = "PNSM_THREADS"
MANIFEST_NAME = "run-manifest.json"


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _nonneg_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _dims(text):
    try:
        dims = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must be comma-separated integers, got {text!r}")
    if not dims:
        raise argparse.ArgumentTypeError("dims must not be empty")
    return tuple(sorted(set(dims), reverse=True))


def _case(text):
    case = text.replace("-", "_")
    if case not in ALL_CASES:
        raise argparse.ArgumentTypeError(
            f"unknown case {text!r}; choose from {', '.join(c.replace('_', '-') for c in ALL_CASES)}")
    return case


def _read(path):
    try:
        return read_cloud(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _manifest(args, command, config, outputs):
    return {
        "tool": "pnsm",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "command": command,
        "argv": args.argv,
        "cwd": os.getcwd(),
        "config": config,
        "seed": config.get("seed"),
        "outputs": [str(p) for p in outputs],
    }


def _write_manifest(path, manifest):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sidecar(path, suffix):
    path = Path(path)
    return path.with_name(path.stem + suffix)


def cmd_simulate(args):
    spec = ScenarioSpec(args.case, n=args.n, sigma1=args.sigma1, sigma2=args.sigma2,
                        sigma=args.sigma, seed=args.seed, strict_interval=args.strict_interval)
    sample = generate(spec)
    out = Path(args.out)
    cloud = PointCloud(sample.points, source=spec.case, extra={"t": sample.t})
    write_cloud(out, cloud)
    config = {"case": spec.case, "n": spec.n, "sigma1": spec.sigma1, "sigma2": spec.sigma2,
              "sigma": spec.sigma, "seed": spec.seed, "strict_interval": spec.strict_interval,
              "interval": list(spec.interval), "embedding": spec.embedding.kind,
              "columns": "angles (phi, psi)" if not spec.is_euclidean else "ambient x1..x3"}
    _write_manifest(_sidecar(out, ".run-manifest.json"), _manifest(args, "simulate", config, [out]))
    logger.info("wrote %d points to %s", spec.n, out)


def _embedding_for(args, cloud):
    try:
        return EmbeddingSpec.from_name(args.embedding, cloud.dim)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _level_cloud(points, source, angles=None):
    extra = {}
    if angles is not None:
        extra = {"phi": angles[:, 0], "psi": angles[:, 1]}
    if source.extra.get("t") is not None:
        extra["t"] = source.extra["t"]
    return PointCloud(points, source.labels, extra=extra)


def cmd_fit(args):
    raw = _read(args.input)
    spec = _embedding_for(args, raw)
    try:
        config = FitConfig(radius=args.radius, dims=args.dims, epsilon=args.epsilon,
                           max_iter=args.max_iter, c=args.c, beta=args.beta, embedding=spec,
                           seed=args.seed, step=args.step, recompute_frames=args.recompute_frames,
                           threads=args.threads)
        embed_input(raw, spec)
        dims = config.resolve_dims(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = fit_nested(raw, config)
        for w in caught:
            logger.warning("%s", w.message)
        diag_cols = {k: [] for k in ("d", "index", "iterations", "residual", "converged",
                                      "status", "support_ok")}
        for level in result.levels:
            path = out_dir / f"d{level.d}.csv"
            written.append(path)
            write_cloud(path, _level_cloud(level.points, raw, level.angles))
            n = len(level.points)
            diag_cols["d"].append(np.full(n, level.d))
            diag_cols["index"].append(np.arange(n))
            diag_cols["iterations"].append(level.iterations)
            diag_cols["residual"].append(level.residual)
            diag_cols["converged"].append(level.converged.astype(np.int64))
            diag_cols["status"].append(level.status)
            diag_cols["support_ok"].append(level.support_ok.astype(np.int64))
        diag = out_dir / "diagnostics.csv"
        written.append(diag)
        write_csv(diag, [np.concatenate(v) for v in diag_cols.values()], list(diag_cols))
    except FitFailure:
        for path in written:
            path.unlink(missing_ok=True)
        raise

    resolved = {"radius": config.radius, "dims": list(dims), "epsilon": config.epsilon,
                "max_iter": config.max_iter, "c": config.c, "beta": config.beta,
                "embedding": spec.kind, "ambient_dim": spec.ambient_dim, "seed": config.seed,
                "step": config.step, "recompute_frames": config.recompute_frames,
                "tie_retries": config.tie_retries, "tie_inflation": config.tie_inflation,
                "input": str(args.input), "n": raw.n}
    _write_manifest(out_dir / MANIFEST_NAME, _manifest(args, "fit", resolved, written))


def cmd_pca(args):
    raw = _read(args.input)
    spec = _embedding_for(args, raw)
    try:
        embedded = embed_input(raw, spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dims = args.dims or tuple(range(spec.ambient_dim - 1, 0, -1))
    bad = [d for d in dims if not 1 <= d <= spec.ambient_dim]
    if bad:
        raise UsageError(f"PCA dimensions must lie in [1, {spec.ambient_dim}], got {list(dims)}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for d in dims:
        path = out_dir / f"d{d}.csv"
        write_cloud(path, _level_cloud(pca_projection(embedded, d), raw))
        written.append(path)
    resolved = {"dims": list(dims), "embedding": spec.kind, "input": str(args.input),
                "n": raw.n, "seed": None}
    _write_manifest(out_dir / MANIFEST_NAME, _manifest(args, "pca", resolved, written))


def _level_of(path):
    match = re.search(r"d(\d+)", Path(path).stem)
    return int(match.group(1)) if match else None


def cmd_metrics(args):
    original = _read(args.original)
    spec = _embedding_for(args, original)
    try:
        base = embed_input(original, spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.dims is not None:
        if len(args.dims) != len(args.projected):
            raise UsageError("--dims needs one entry per projected file")
        dims = list(args.dims)
    else:
        dims = [_level_of(p) for p in args.projected]
        if None in dims:
            raise UsageError("cannot infer d from a projected file name; pass --dims")
    levels = {}
    for d, path in zip(dims, args.projected):
        cloud = _read(path)
        if cloud.points.shape != base.shape:
            raise UsageError(f"{path}: shape {cloud.points.shape} does not match original {base.shape}")
        levels[d] = cloud.points

    labels = None
    if args.labels:
        lab = _read(args.labels)
        labels = lab.labels if lab.labels is not None else lab.points[:, 0].astype(np.int64)
    elif original.labels is not None:
        labels = original.labels
    if labels is not None and len(labels) != len(base):
        raise UsageError("labels must have one entry per point")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = metric_sweep(base, levels, labels=labels, k=args.k, mode=args.mode)
    for w in caught:
        logger.warning("%s", w.message)
    report.metadata.update({"original": str(args.original),
                            "projected": [str(p) for p in args.projected],
                            "embedding": spec.kind, "labels": bool(labels is not None)})
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, txt_path = out_dir / "metrics.csv", out_dir / "metrics-report.txt"
    csv_path.write_text(report.to_csv())
    txt_path.write_text(report.to_text())
    resolved = dict(report.metadata, dims=dims, seed=None)
    _write_manifest(out_dir / MANIFEST_NAME,
                    _manifest(args, "metrics", resolved, [csv_path, txt_path]))


def cmd_filter(args):
    cloud = _read(args.input)
    kept, removed = outlier_filter(cloud, args.radius, args.min_neighbors)
    out = Path(args.out)
    removed_path = Path(args.removed) if args.removed else _sidecar(out, ".removed.csv")
    if kept.n == 0:
        logger.warning("every point was removed; writing an empty cloud")
    write_cloud(out, kept, [f"x{j + 1}" for j in range(cloud.dim)])
    write_csv(removed_path, [removed.astype(np.int64)], ["index"])
    resolved = {"radius": args.radius, "min_neighbors": args.min_neighbors,
                "input": str(args.input), "n_in": cloud.n, "n_kept": kept.n,
                "n_removed": int(len(removed)), "seed": None}
    _write_manifest(_sidecar(out, ".run-manifest.json"),
                    _manifest(args, "filter", resolved, [out, removed_path]))


def cmd_replay(args):
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read manifest {args.manifest}: {exc}") from exc
    argv = manifest.get("argv")
    if not isinstance(argv, list) or not argv:
        raise UsageError("manifest has no argument vector")
    cwd = manifest.get("cwd")
    previous = os.getcwd()
    try:
        if cwd:
            os.chdir(cwd)
        return main(argv)
    finally:
        os.chdir(previous)


def build_parser():
    default_threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    parser = argparse.ArgumentParser(prog="pnsm", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scenario as CSV")
    p.add_argument("--case", type=_case, required=True)
    p.add_argument("--n", type=_positive_int, default=10_000)
    p.add_argument("--sigma1", type=_nonneg_float)
    p.add_argument("--sigma2", type=_nonneg_float)
    p.add_argument("--sigma", type=_nonneg_float, default=0.1)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--strict-interval", action="store_true",
                   help="circle case: sample t in (0, 1) instead of (0, 2*pi)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit principal nested submanifolds")
    p.add_argument("--input", required=True)
    p.add_argument("--radius", type=_positive_float, required=True)
    p.add_argument("--dims", type=_dims)
    p.add_argument("--embedding", default="euclidean", choices=["euclidean", "sphere", "torus"])
    p.add_argument("--epsilon", type=_positive_float, default=1e-6)
    p.add_argument("--max-iter", type=_positive_int, default=200)
    p.add_argument("--c", type=float, default=0.9)
    p.add_argument("--beta", type=_positive_float, default=3.0)
    p.add_argument("--step", type=_positive_float, default=1.0)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--recompute-frames", action="store_true",
                   help="extension: refit local frames on each level's output")
    p.add_argument("--threads", type=_positive_int, default=default_threads)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("pca", help="linear baseline: project onto top principal components")
    p.add_argument("--input", required=True)
    p.add_argument("--dims", type=_dims)
    p.add_argument("--embedding", default="euclidean", choices=["euclidean", "sphere", "torus"])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("metrics", help="silhouette, proportion of variation and MSE per level")
    p.add_argument("--original", required=True)
    p.add_argument("--projected", nargs="+", required=True)
    p.add_argument("--dims", type=lambda s: [int(x) for x in s.split(",")])
    p.add_argument("--labels")
    p.add_argument("--embedding", default="euclidean", choices=["euclidean", "sphere", "torus"])
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--mode", choices=[CUMULATIVE, STEPWISE], default=CUMULATIVE)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("filter", help="drop points with too few radius neighbours")
    p.add_argument("--input", required=True)
    p.add_argument("--radius", type=_positive_float, default=6.0)
    p.add_argument("--min-neighbors", type=_nonneg_int, default=25)
    p.add_argument("--out", required=True)
    p.add_argument("--removed")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("replay", help="rerun a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = args.func(args)
        return EXIT_OK if rc is None else rc
    except UsageError as exc:
        parser.error(str(exc))
    except InputError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    except (FitFailure, PNSMError) as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
