"""Partition-quality metrics and the parameter-grid experiment runner."""

import csv
import itertools
import math
import traceback
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bordergeom import IntersectionPolicy
from .dc import DcConfig, delaunay_dc
from .samplepart import PartitionConfig, SampleRule
from .tristore import DEFAULT_ORACLE_LIMIT, validate_delaunay
from .workload import DistributionSpec, generate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class UndefinedForSinglePart(ValueError):
    pass


def ideal_deviation(sizes, k=None):
    """Relative deviation ``p_i / (N/k) - 1`` of every part size."""
    sizes = np.asarray(sizes, dtype=np.float64)
    k = sizes.shape[0] if k is None else k
    total = sizes.sum()
    if total <= 0:
        raise ValueError("sizes must sum to a positive number")
    return sizes / (total / k) - 1.0


def coefficient_of_variation(sizes):
    """Sample standard deviation (divisor k-1) over the mean."""
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.shape[0] < 2:
        raise UndefinedForSinglePart("c_v needs at least two parts")
    mu = sizes.mean()
    if mu <= 0:
        raise ValueError("mean part size must be positive")
    return float(sizes.std(ddof=1) / mu)


def overtriangulation(n, sample_sizes=(), border_vertex_counts=()):
    """``(n + sum(samples) + sum(border vertices)) / n``."""
    if n <= 0:
        raise ValueError("n must be positive")
    return (n + sum(sample_sizes) + sum(border_vertex_counts)) / n


# --------------------------------------------------------------------------
# experiment grid

GRID_KEYS = ("dist", "dim", "n", "k", "strategy", "divider", "weights",
             "sample", "policy", "seed", "threads", "base_case_threshold")

GRID_DEFAULTS = {
    "dist": ["uniform"], "dim": [3], "n": [10000], "k": [4],
    "strategy": ["kway"], "divider": ["sample"], "weights": ["logarithmic"],
    "sample": ["sqrt"], "policy": ["grid=1"], "seed": [0], "threads": [1],
    "base_case_threshold": [1000],
}

TIMING_COLUMNS = ("t_divide", "t_partial", "t_border_detect", "t_border_dt",
                  "t_merge", "t_repair", "t_total")

COLUMNS = GRID_KEYS + (
    "part_sizes", "c_v", "max_ideal_deviation", "o_dt", "sample_sizes",
    "border_vertex_counts", "cut", "merges", "n_simplices", "validity",
    "error") + TIMING_COLUMNS


def load_grid(path):
    """Read a TOML grid; keys may sit at top level or under ``[grid]``."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    grid = data.get("grid", data)
    options = {k: v for k, v in data.get("options", {}).items()}
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    return grid, options


def expand_grid(grid):
    """Cartesian product of the grid values (scalars count as one value)."""
    axes = []
    for key in GRID_KEYS:
        v = grid.get(key, GRID_DEFAULTS[key])
        axes.append(v if isinstance(v, (list, tuple)) else [v])
    for combo in itertools.product(*axes):
        yield dict(zip(GRID_KEYS, combo))


def config_from_row(row):
    pc = PartitionConfig(sample_size_rule=SampleRule.parse(row["sample"]),
                         weight_fn=row["weights"], k=int(row["k"]))
    return DcConfig(base_case_threshold=int(row["base_case_threshold"]),
                    strategy=row["strategy"], divider=row["divider"],
                    partition=pc,
                    policy=IntersectionPolicy.parse(row["policy"]),
                    k=int(row["k"]), threads=int(row["threads"]),
                    seed=int(row["seed"]))


def _fmt_list(values):
    return ";".join(str(int(v)) for v in values)


def report_row(row, T, stats, validity=""):
    """Fill the metric and timing columns of ``row`` from a finished run."""
    out = dict(row)
    for c in COLUMNS:
        out.setdefault(c, "")
    sizes = stats.leaf_sizes
    o_dt = overtriangulation(stats.n, stats.sample_sizes,
                             stats.border_vertex_counts)
    out.update(
        part_sizes=_fmt_list(sizes),
        c_v=(f"{coefficient_of_variation(sizes):.6f}"
             if len(sizes) > 1 else ""),
        max_ideal_deviation=f"{ideal_deviation(sizes).max():.6f}",
        o_dt=f"{o_dt:.6f}",
        sample_sizes=_fmt_list(stats.sample_sizes),
        border_vertex_counts=_fmt_list(stats.border_vertex_counts),
        cut=sum(int(r.cut) for r in stats.records),
        merges=stats.merges,
        n_simplices=T.n_finite,
        validity=validity,
    )
    for key, val in stats.times.items():
        out["t_" + key] = f"{val:.6f}"
    out["t_total"] = f"{stats.total_time:.6f}"
    return out


def run_one(row, points=None, validate=True,
            oracle_limit=DEFAULT_ORACLE_LIMIT):
    """Run one grid point; returns the CSV row as a dict.

    Exceptions are caught and recorded in the ``error`` column.
    """
    try:
        if points is None:
            points = _points(row)
        T, stats = delaunay_dc(points, config_from_row(row),
                               return_stats=True)
        if validate and points.shape[0] <= oracle_limit:
            validity = validate_delaunay(T, limit=oracle_limit).summary()
        else:
            validity = "skipped"
        return report_row(row, T, stats, validity)
    except Exception as exc:  # recorded, the grid continues
        out = dict(row)
        for c in COLUMNS:
            out.setdefault(c, "")
        out["error"] = f"{type(exc).__name__}: {exc}"
        out["validity"] = "error"
        out["traceback"] = traceback.format_exc()
        return out


def _points(row):
    return generate(DistributionSpec(row["dist"], int(row["n"]),
                                     int(row["dim"]), int(row["seed"])))


def _run_isolated(args):
    row, validate, oracle_limit = args
    row = dict(row, threads=1)
    return run_one(row, None, validate, oracle_limit)


def run_experiment(grid, out_path=None, validate=True,
                   oracle_limit=DEFAULT_ORACLE_LIMIT, jobs=1, progress=None):
    """Run every combination of ``grid``; optionally write a CSV.

    Runs are sequential unless ``jobs > 1``, in which case they execute in
    worker processes with ``threads=1`` each. Returns the row dicts in grid
    order.
    """
    combos = list(expand_grid(grid))
    rows = []
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            for r in ex.map(_run_isolated,
                            [(c, validate, oracle_limit) for c in combos]):
                rows.append(r)
                if progress is not None:
                    progress(r)
    else:
        cache = {}
        for row in combos:
            key = (row["dist"], row["n"], row["dim"], row["seed"])
            if key not in cache:
                cache.clear()
                cache[key] = _points(row)
            r = run_one(row, cache[key], validate, oracle_limit)
            rows.append(r)
            if progress is not None:
                progress(r)
    if out_path is not None:
        write_csv(rows, out_path)
    return rows


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def non_timing(row):
    return {k: row[k] for k in COLUMNS if k not in TIMING_COLUMNS}


def is_finite_number(text):
    try:
        return math.isfinite(float(text))
    except (TypeError, ValueError):
        return False
