"""Command-line entry point: ``sampledt {generate,triangulate,validate,bench}``.

Exit codes: 0 ok, 1 validation failure, 2 usage error, 3 runtime error.
"""

import argparse
import sys

import numpy as np

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _param(text):
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    parts = [float(v) for v in val.split(",")]
    return key, (parts[0] if len(parts) == 1 else tuple(parts))


def _sample_rule(text):
    from .samplepart import SampleRule
    try:
        return SampleRule.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _policy(text):
    from .bordergeom import IntersectionPolicy
    try:
        return IntersectionPolicy.parse(text)
    except (ValueError, KeyError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _weights(text):
    from .samplepart import weight_fn_name
    try:
        return weight_fn_name(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    from .workload import KINDS

    p = argparse.ArgumentParser(
        prog="sampledt",
        description="Divide-and-conquer Delaunay triangulation with "
                    "sample-based partitioning.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic point set")
    g.add_argument("--dist", required=True, choices=KINDS)
    g.add_argument("--n", required=True, type=_positive)
    g.add_argument("--seed", required=True, type=int)
    g.add_argument("--dim", type=int, choices=(2, 3), default=3)
    g.add_argument("--out", help="output file (.csv or PTS1 binary); "
                                 "CSV on stdout if omitted")
    g.add_argument("--format", choices=("binary", "csv"))
    g.add_argument("params", nargs="*", type=_param, metavar="key=value",
                   help="distribution parameters, e.g. sigma=0.05 m=8")

    t = sub.add_parser("triangulate", help="run the divide-and-conquer DT")
    t.add_argument("--in", dest="inp", required=True)
    t.add_argument("--k", type=_positive, default=None,
                   help="number of partitions (default: threads)")
    t.add_argument("--strategy", choices=("kway", "bisect"), default="kway")
    t.add_argument("--divider", choices=("sample", "cyclic"),
                   default="sample")
    t.add_argument("--weights", type=_weights, default="logarithmic")
    t.add_argument("--sample", type=_sample_rule, default="sqrt")
    t.add_argument("--policy", type=_policy, default="grid=1")
    t.add_argument("--threads", type=_positive, default=1)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--base-case", type=_positive, default=10000,
                   dest="base_case")
    t.add_argument("--out", help="triangulation CSV")
    t.add_argument("--report", help="one-row report CSV")
    t.add_argument("--validate", action="store_true",
                   help="run the oracle on the result")

    v = sub.add_parser("validate", help="check a triangulation with the oracle")
    v.add_argument("--points", required=True)
    v.add_argument("--tris", required=True)
    v.add_argument("--limit", type=_positive, default=None,
                   help="oracle point limit")
    v.add_argument("--method", choices=("grid", "brute"), default="grid")

    b = sub.add_parser("bench", help="run a parameter grid")
    b.add_argument("--grid", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--jobs", type=_positive, default=1,
                   help="concurrent runs (each forced to threads=1)")
    b.add_argument("--no-validate", action="store_true")
    return p


# --------------------------------------------------------------------------
# commands


def _cmd_generate(args):
    from .workload import DistributionSpec, generate, save_points

    spec = DistributionSpec(args.dist, args.n, args.dim, args.seed,
                            dict(args.params))
    X = generate(spec)
    if args.out:
        save_points(X, args.out, args.format)
    else:
        sys.stdout.write(",".join("xyz"[:X.shape[1]]) + "\n")
        np.savetxt(sys.stdout, X, fmt="%.17g", delimiter=",")
    return EXIT_OK


def _cmd_triangulate(args):
    from . import bench
    from .dc import DcConfig, delaunay_dc
    from .samplepart import PartitionConfig
    from .tristore import validate_delaunay
    from .workload import deduplicate, load_points

    raw = load_points(args.inp)
    X, remap = deduplicate(raw)
    if X.shape[0] < raw.shape[0]:
        print(f"dropped {raw.shape[0] - X.shape[0]} duplicate points",
              file=sys.stderr)
    k = args.k or args.threads
    cfg = DcConfig(base_case_threshold=args.base_case,
                   strategy=args.strategy, divider=args.divider,
                   partition=PartitionConfig(args.sample, args.weights, k,
                                             seed=args.seed),
                   policy=args.policy, k=k, threads=args.threads,
                   seed=args.seed)
    T, stats = delaunay_dc(X, cfg, return_stats=True)
    for w in stats.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{T.n_finite} simplices over {X.shape[0]} points "
          f"in {stats.total_time:.3f} s")

    status = EXIT_OK
    validity = "skipped"
    if args.validate:
        rep = validate_delaunay(T)
        validity = rep.summary()
        print(validity)
        status = EXIT_OK if rep.ok else EXIT_INVALID
    if args.out:
        # map back to row numbers of the input file (first occurrence)
        first = np.full(X.shape[0], -1, dtype=np.int64)
        first[remap[::-1]] = np.arange(raw.shape[0] - 1, -1, -1)
        T.save_csv(args.out, id_map=first, n_points=raw.shape[0])
    if args.report:
        row = {"dist": args.inp, "dim": X.shape[1], "n": X.shape[0], "k": k,
               "strategy": args.strategy, "divider": args.divider,
               "weights": args.weights, "sample": str(args.sample),
               "policy": str(args.policy), "seed": args.seed,
               "threads": args.threads,
               "base_case_threshold": args.base_case}
        bench.write_csv([bench.report_row(row, T, stats, validity)],
                        args.report)
    return status


def _cmd_validate(args):
    from .tristore import (DEFAULT_ORACLE_LIMIT, from_rows,
                           load_triangulation_csv, validate_delaunay)
    from .workload import deduplicate, load_points

    raw = load_points(args.points)
    meta, rows = load_triangulation_csv(args.tris)
    if meta.get("dim", raw.shape[1]) != raw.shape[1]:
        raise UsageError("dimension of points and triangulation differ")
    if meta.get("n_points", raw.shape[0]) != raw.shape[0]:
        raise UsageError("point count of points and triangulation differ")
    if rows.size and (rows.min() < 0 or rows.max() >= raw.shape[0]):
        raise UsageError("triangulation references unknown point ids")
    X, remap = deduplicate(raw)
    T = from_rows(X, remap[rows] if rows.size else rows)
    limit = args.limit or max(DEFAULT_ORACLE_LIMIT, X.shape[0])
    rep = validate_delaunay(T, limit=limit, method=args.method)
    print(rep.summary())
    return EXIT_OK if rep.ok else EXIT_INVALID


def _cmd_bench(args):
    from . import bench

    grid, options = bench.load_grid(args.grid)
    jobs = options.get("jobs", args.jobs)
    validate = options.get("validate", not args.no_validate)

    def progress(r):
        flag = r["error"] or r["validity"]
        print(f"{r['dist']} D={r['dim']} n={r['n']} k={r['k']} "
              f"{r['strategy']}/{r['divider']} {r['policy']} "
              f"seed={r['seed']}: {flag}", file=sys.stderr)

    rows = bench.run_experiment(grid, args.out, validate=validate,
                                jobs=jobs, progress=progress)
    bad = [r for r in rows if r["error"] or
           r["validity"] not in ("ok", "skipped")]
    print(f"{len(rows)} runs, {len(bad)} failed; wrote {args.out}")
    return EXIT_INVALID if bad else EXIT_OK


_COMMANDS = {"generate": _cmd_generate, "triangulate": _cmd_triangulate,
             "validate": _cmd_validate, "bench": _cmd_bench}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    from .workload import FormatError
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ValueError, RuntimeError, OSError, MemoryError) \
            as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
