"""Command-line entry point: ``aumap <subcommand> ...``.

Exit status: 0 on success, 1 on domain errors (one ``error: <code>: <message>``
line on stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import accuracy, bench, dataio, server
from .core import AumapError, ProjectorConfig
from .projector import fit

log = logging.getLogger("aumap")

SEED_MAX = 2**64 - 1


class UsageError(Exception):
    """Bad flag values detected after parsing; reported with exit status 2."""


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _add_projector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--inputs", required=True, help="training inputs CSV (x0..x{D-1}[,label])")
    p.add_argument("--projections", required=True, help="training projections CSV (u0..u{m-1})")
    p.add_argument("--k", type=_positive, default=15, help="neighbors per projection (default 15)")
    p.add_argument("--epsilon", type=float, default=1e-12, help="zero-distance threshold")
    p.add_argument("--strategy", choices=("auto", "kd_tree", "brute_force", "matmul"), default="auto")


def _add_bench_flags(p: argparse.ArgumentParser, batch_default: int) -> None:
    p.add_argument("--vary", choices=("dimensionality", "sample_count"), required=True)
    p.add_argument("--values", type=_int_list, required=True, help="comma-separated ascending values")
    p.add_argument("--fixed", type=_positive, help="sample count (vary=dimensionality, default 5000) "
                   "or dimensionality (vary=sample_count, default 1000)")
    p.add_argument("--test-samples", type=_positive, default=500)
    p.add_argument("--batch-size", type=_positive, default=batch_default)
    p.add_argument("--repetitions", type=_positive, default=10)
    p.add_argument("--classes", type=_positive, default=5)
    p.add_argument("--k", type=_positive, default=15)
    p.add_argument("--workers", type=_positive, default=1, help="projection threads (default 1)")
    p.add_argument("--out", default="-", help="CSV report path, '-' for stdout")
    p.add_argument("--svg", help="also write an SVG chart here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aumap", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=_seed, default=0, help="unsigned 64-bit seed (default 0)")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    # global flags are also accepted after the subcommand; SUPPRESS keeps the
    # subparser from overwriting a value given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("gen-data", parents=[common], help="generate a multiclass Poisson dataset")
    p.add_argument("--classes", type=_positive, required=True)
    p.add_argument("--dim", type=_positive, required=True)
    p.add_argument("--per-class", type=_positive, required=True)
    p.add_argument("--rate-low", type=float, default=1.0)
    p.add_argument("--rate-high", type=float, default=10.0)
    p.add_argument("--out", required=True, help="output CSV, '-' for stdout")

    p = sub.add_parser("project", parents=[common], help="project new points onto a reference embedding")
    _add_projector_flags(p)
    p.add_argument("--points", required=True, help="CSV of points to project")
    p.add_argument("--batch-size", type=_positive, help="project in batches of this size")
    p.add_argument("--out", required=True, help="output projections CSV, '-' for stdout")

    p = sub.add_parser("serve", parents=[common], help="serve projections as newline-delimited JSON")
    _add_projector_flags(p)
    where = p.add_mutually_exclusive_group(required=True)
    where.add_argument("--listen", metavar="HOST:PORT", help="TCP listen address")
    where.add_argument("--stdio", action="store_true", help="read requests on stdin, answer on stdout")

    p = sub.add_parser("bench-fit", parents=[common], help="time projector construction")
    _add_bench_flags(p, batch_default=5)

    p = sub.add_parser("bench-project", parents=[common], help="time projection of test points")
    _add_bench_flags(p, batch_default=5)

    p = sub.add_parser("eval-accuracy", parents=[common], help="normalized distance to oracle projections")
    p.add_argument("--approx", required=True)
    p.add_argument("--oracle", required=True)
    p.add_argument("--csv", help="also write the report as CSV here, '-' for stdout")

    p = sub.add_parser("plot", parents=[common], help="scatter plot of train, oracle and approximate projections")
    p.add_argument("--inputs", required=True, help="training inputs CSV with a label column")
    p.add_argument("--projections", required=True, help="training projections CSV")
    p.add_argument("--oracle", required=True, help="oracle test projections CSV")
    p.add_argument("--approx", required=True, help="approximate test projections CSV")
    p.add_argument("--test-inputs", help="test inputs CSV whose label column colors the test points")
    p.add_argument("--title", default="")
    p.add_argument("--out", required=True, help="output SVG path")
    return parser


def _checked(factory, *args, **kwargs):
    """Build a config object, turning its validation errors into usage errors."""
    try:
        return factory(*args, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _projector(args):
    config = _checked(ProjectorConfig, k=args.k, zero_distance_epsilon=args.epsilon, strategy=args.strategy)
    embedding = dataio.load_embedding(args.inputs, args.projections)
    return fit(embedding, config)


def _emit(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    with dataio.atomic_write(Path(path)) as fh:
        fh.write(text)


def cmd_gen_data(args):
    spec = _checked(dataio.PoissonSpec, args.classes, args.dim, args.per_class,
                    args.rate_low, args.rate_high, args.seed)
    ds = dataio.generate_poisson(spec)
    dataio.save_dataset(ds, args.out)
    log.info("wrote %d samples of dimension %d (sha256 %s)", ds.n, ds.dim, ds.content_hash()[:16])


def cmd_project(args):
    projector = _projector(args)
    points = dataio.load_dataset(args.points).samples
    if args.batch_size:
        parts = [projector.project_batch(points[i : i + args.batch_size])
                 for i in range(0, points.shape[0], args.batch_size)]
        out = np.vstack(parts) if parts else np.empty((0, projector.out_dim))
    else:
        out = projector.project_batch(points)
    dataio.save_projections(out, args.out)
    log.info("projected %d points", out.shape[0])


def cmd_serve(args):
    if args.listen:
        host, _, port = args.listen.rpartition(":")
        if not port.isdigit():
            raise UsageError(f"--listen expects HOST:PORT, got {args.listen!r}")
    projector = _projector(args)
    if args.stdio:
        server.serve(projector, stdio=True)
        return
    server.serve(projector, host or "127.0.0.1", int(port),
                 ready=lambda addr: log.info("listening on %s:%d", *addr))


def _bench(args, runner):
    cond = _checked(
        bench.BenchCondition,
        vary=args.vary, values=args.values, fixed_value=args.fixed, test_samples=args.test_samples,
        batch_size=args.batch_size, repetitions=args.repetitions, seed=args.seed,
        class_count=args.classes, k=args.k, workers=args.workers,
    )

    def progress(row):
        log.info("%s=%d mean=%.6fs std=%.6fs excluded=%d", cond.vary, row.value, row.mean_s, row.std_s, row.excluded)

    report = runner(cond, progress=progress)
    _emit(report.to_csv(), args.out)
    if args.svg:
        _emit(report.to_svg(), args.svg)


def cmd_bench_fit(args):
    _bench(args, bench.bench_fit)


def cmd_bench_project(args):
    _bench(args, bench.bench_project)


def cmd_eval_accuracy(args):
    report = accuracy.normalized_mean_distance(
        dataio.load_projections(args.approx), dataio.load_projections(args.oracle)
    )
    print(report.as_text())
    if args.csv:
        _emit(accuracy.AccuracyReport.CSV_HEADER + "\n" + report.as_csv_row() + "\n", args.csv)


def cmd_plot(args):
    train = dataio.load_embedding(args.inputs, args.projections)
    test_labels = dataio.load_dataset(args.test_inputs).labels if args.test_inputs else None
    accuracy.emit_scatter_svg(
        train, dataio.load_projections(args.oracle), dataio.load_projections(args.approx),
        args.out, test_labels=test_labels, title=args.title,
    )


COMMANDS = {
    "gen-data": cmd_gen_data,
    "project": cmd_project,
    "serve": cmd_serve,
    "bench-fit": cmd_bench_fit,
    "bench-project": cmd_bench_project,
    "eval-accuracy": cmd_eval_accuracy,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"aumap: error: {exc}", file=sys.stderr)
        return 2
    except AumapError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: file_not_found: {exc}", file=sys.stderr)
        return 1
    except server.BindFailure as exc:
        print(f"error: bind_failure: {exc.strerror}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: invalid_argument: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
