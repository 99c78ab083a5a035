"""Sample-based divide step and the cyclic median-split baseline.

A random sample is triangulated, its Delaunay edges become a weighted graph,
the graph is partitioned, and every input point joins the part of its
nearest sample point.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .graphpart import SampleGraph, cut_weight, partition
from .seqdt import triangulate_seq

WEIGHT_FNS = ("constant", "inverse", "logarithmic", "linear")
_WEIGHT_ALIASES = {"log": "logarithmic", "const": "constant",
                   "inv": "inverse", "lin": "linear"}

D_MIN = 1e-12


class SampleTooSmall(ValueError):
    pass


class KNotPowerOfTwo(ValueError):
    pass


class PartitionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SampleRule:
    """``sqrt_n``, ``log_n`` or ``fraction`` with ``f`` in (0, 0.5]."""

    kind: str = "sqrt_n"
    f: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sqrt_n", "log_n", "fraction"):
            raise ValueError(f"unknown sample rule {self.kind!r}")
        if self.kind == "fraction" and not 0 < self.f <= 0.5:
            raise ValueError("fraction must be in (0, 0.5]")

    @classmethod
    def parse(cls, text):
        text = str(text).strip()
        if text in ("sqrt", "sqrt_n"):
            return cls("sqrt_n")
        if text in ("log", "log_n"):
            return cls("log_n")
        if text.startswith("frac="):
            return cls("fraction", float(text[5:]))
        raise ValueError(f"unknown sample rule {text!r}")

    def size(self, n):
        if self.kind == "sqrt_n":
            return int(round(math.sqrt(n)))
        if self.kind == "log_n":
            return int(round(math.log(n))) if n > 1 else 1
        return int(round(self.f * n))

    def __str__(self):
        return {"sqrt_n": "sqrt", "log_n": "log"}.get(self.kind,
                                                       f"frac={self.f:g}")


def weight_fn_name(name):
    name = _WEIGHT_ALIASES.get(name, name)
    if name not in WEIGHT_FNS:
        raise ValueError(f"unknown weight function {name!r}")
    return name


@dataclass
class PartitionConfig:
    sample_size_rule: SampleRule = field(default_factory=SampleRule)
    weight_fn: str = "logarithmic"
    k: int = 2
    epsilon: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.sample_size_rule, str):
            self.sample_size_rule = SampleRule.parse(self.sample_size_rule)
        self.weight_fn = weight_fn_name(self.weight_fn)
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class Partitioning:
    """Labels over the partitioned ids plus per-part id lists.

    ``ids[i]`` carries label ``labels[i]``; ``parts[j]`` lists the ids with
    label ``j`` in ascending order.
    """

    ids: np.ndarray
    labels: np.ndarray
    k: int
    sample_point_ids: np.ndarray = None
    sample_labels: np.ndarray = None
    cut: int = 0
    warnings: list = field(default_factory=list)
    _parts: list = field(default=None, repr=False)

    @property
    def parts(self):
        if self._parts is None:
            order = np.lexsort((self.ids, self.labels))
            bounds = np.searchsorted(self.labels[order], np.arange(self.k + 1))
            self._parts = [self.ids[order[bounds[j]:bounds[j + 1]]]
                           for j in range(self.k)]
        return self._parts

    def sizes(self):
        return np.bincount(self.labels, minlength=self.k)


def _warn(msg, sink):
    sink.append(msg)
    warnings.warn(msg, PartitionWarning, stacklevel=3)


# --------------------------------------------------------------------------
# sampling and graph construction


def sample_size(n, rule, dim, k=1, sink=None):
    """Sample size for ``n`` points, clamped to ``max(D+2, 2k)``."""
    eta = rule.size(n)
    lo = max(dim + 2, 2 * k)
    if n < dim + 2:
        raise SampleTooSmall(f"{n} points cannot give a sample of {dim + 2}")
    if eta < lo:
        eta = min(lo, n)
        if sink is not None:
            _warn(f"sample size {rule.size(n)} clamped to {eta}", sink)
    return min(eta, n)


def draw_sample(n_or_ids, rule, seed, dim=3, k=1, sink=None):
    """Ids of a uniform random sample without replacement, sorted.

    ``n_or_ids`` is a point count (ids ``0..n-1``) or an id array.
    """
    if isinstance(rule, str):
        rule = SampleRule.parse(rule)
    ids = (np.arange(n_or_ids) if np.isscalar(n_or_ids)
           else np.asarray(n_or_ids, dtype=np.int64))
    eta = sample_size(ids.shape[0], rule, dim, k, sink)
    rng = np.random.default_rng(seed)
    pick = rng.choice(ids.shape[0], size=eta, replace=False)
    return np.sort(ids[pick])


def edge_weight_real(d, fn):
    """Pre-scaling weight ``r`` for normalized distances ``d``."""
    fn = weight_fn_name(fn)
    d = np.clip(np.asarray(d, dtype=np.float64), D_MIN, 1.0)
    if fn == "constant":
        return np.ones_like(d)
    if fn == "inverse":
        return 1.0 / d
    if fn == "logarithmic":
        return -np.log(d)
    return 1.0 - d


def scale_weights(r):
    """Affine map of real weights onto integers in [1, 1000]."""
    r = np.asarray(r, dtype=np.float64)
    if r.size == 0:
        return np.zeros(0, dtype=np.int64)
    lo, hi = r.min(), r.max()
    if hi == lo:
        return np.ones(r.shape, dtype=np.int64)
    return np.rint(1.0 + 999.0 * (r - lo) / (hi - lo)).astype(np.int64)


def edge_weight(v, w, fn, d_star):
    """Real weight ``r`` of the edge ``v``-``w`` (before integer scaling)."""
    d = np.linalg.norm(np.asarray(v, float) - np.asarray(w, float)) / d_star
    return float(edge_weight_real(d, fn))


def sample_edges(T):
    """Distinct finite edges of a triangulation as sorted id pairs."""
    rows = T.simplices[T.finite_live]
    nv = rows.shape[1]
    pairs = [rows[:, [i, j]] for i in range(nv) for j in range(i + 1, nv)]
    if not pairs or rows.shape[0] == 0:
        return np.empty((0, 2), dtype=np.int64)
    e = np.sort(np.concatenate(pairs), axis=1)
    return np.unique(e, axis=0)


def build_sample_graph(T_S, fn, vertex_ids=None):
    """Weighted graph over the vertices of ``T_S`` from its Delaunay edges.

    Graph vertex ``i`` is point ``vertex_ids[i]`` (default: the sorted
    vertex ids of ``T_S``).
    """
    if vertex_ids is None:
        vertex_ids = T_S.vertex_ids()
    vertex_ids = np.asarray(vertex_ids, dtype=np.int64)
    e = sample_edges(T_S)
    local = np.searchsorted(vertex_ids, e)
    X = T_S.points[vertex_ids]
    d_star = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
    length = np.linalg.norm(X[local[:, 0]] - X[local[:, 1]], axis=1)
    r = edge_weight_real(length / d_star, fn)
    G = SampleGraph(vertex_ids.shape[0], local, scale_weights(r), X)
    G.vertex_ids = vertex_ids
    G.d_star = d_star
    return G


# --------------------------------------------------------------------------
# nearest-sample assignment


def _nearest_sample(Q, S, kk=8):
    """Index of the nearest row of ``S`` for each row of ``Q``; ties go to the
    lowest index. Distances are recomputed canonically as the sum of squared
    coordinate differences."""
    m = S.shape[0]
    tree = cKDTree(S)
    kk = min(kk, m)
    _, cand = tree.query(Q, k=kk, workers=-1)
    cand = cand.reshape(Q.shape[0], kk)
    d2 = ((Q[:, None, :] - S[cand]) ** 2).sum(axis=-1)
    best = d2.min(axis=1)
    # lowest index among exact ties within the candidate set
    tie = np.where(d2 == best[:, None], cand, m)
    out = tie.min(axis=1)
    if kk < m:
        # a tie or near-tie may lie beyond the k-th candidate
        unsure = np.flatnonzero(d2.max(axis=1) <= best * (1 + 1e-9) + 1e-300)
        for i in unsure.tolist():
            r = math.sqrt(best[i]) * (1 + 1e-9) + 1e-300
            near = np.asarray(tree.query_ball_point(Q[i], r), dtype=np.int64)
            dd = ((Q[i] - S[near]) ** 2).sum(axis=-1)
            out[i] = near[dd == dd.min()].min()
    return out


def assign_points(points, sample_ids, sample_labels, ids=None, k=None):
    """Label each point with the part of its nearest sample point.

    Parameters
    ----------
    points : (N, D) array
    sample_ids : sorted int array of sample point ids
    sample_labels : part per sample point
    ids : int array, optional
        Points to assign (default: all).
    """
    if ids is None:
        ids = np.arange(points.shape[0], dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    sample_ids = np.asarray(sample_ids, dtype=np.int64)
    sample_labels = np.asarray(sample_labels, dtype=np.int64)
    order = np.argsort(sample_ids, kind="stable")
    sample_ids, sample_labels = sample_ids[order], sample_labels[order]
    near = _nearest_sample(points[ids], points[sample_ids])
    if k is None:
        k = int(sample_labels.max()) + 1 if sample_labels.size else 1
    return Partitioning(ids, sample_labels[near], k, sample_ids,
                        sample_labels)


def partition_points(points, config, ids=None):
    """Sample, triangulate, partition the sample graph, assign all points."""
    if ids is None:
        ids = np.arange(points.shape[0], dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    n, dim, k = ids.shape[0], points.shape[1], config.k
    sink = []
    if k == 1:
        return Partitioning(ids, np.zeros(n, dtype=np.int64), 1,
                            np.empty(0, dtype=np.int64),
                            np.empty(0, dtype=np.int64))
    if n < k * (dim + 2):
        raise SampleTooSmall(f"{n} points are too few for {k} parts")
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    sample = draw_sample(ids, config.sample_size_rule,
                         int(seeds[0].generate_state(1)[0]), dim, k, sink)
    T_S = triangulate_seq(points, sample,
                          seed=int(seeds[1].generate_state(1)[0]))
    G = build_sample_graph(T_S, config.weight_fn, sample)
    gp = partition(G, k, config.epsilon,
                   seed=int(seeds[2].generate_state(1)[0]))
    result = assign_points(points, sample, gp.labels, ids, k)
    result.cut = cut_weight(G, gp.labels)
    result.graph = G
    result.graph_partition = gp
    empty = np.flatnonzero(result.sizes() == 0)
    if empty.size:
        _warn(f"parts {empty.tolist()} received no points", sink)
    result.warnings = sink
    return result


# --------------------------------------------------------------------------
# cyclic median split


def cyclic_split(points, ids, axis):
    """Median split of ``ids`` along ``axis``; ties broken by id."""
    order = np.lexsort((ids, points[ids, axis]))
    half = ids.shape[0] // 2
    return ids[order[:half]], ids[order[half:]]


def cyclic_partition(points, k, ids=None, depth=0):
    """Recursive median bisection cycling the split axis by depth."""
    if k < 1 or k & (k - 1):
        raise KNotPowerOfTwo(f"k={k} is not a power of two")
    if ids is None:
        ids = np.arange(points.shape[0], dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    dim = points.shape[1]
    parts = [ids]
    level = depth
    while len(parts) < k:
        nxt = []
        for p in parts:
            nxt.extend(cyclic_split(points, p, level % dim))
        parts = nxt
        level += 1
    labels = np.empty(ids.shape[0], dtype=np.int64)
    pos = np.argsort(ids)
    for j, p in enumerate(parts):
        labels[pos[np.searchsorted(ids[pos], p)]] = j
    return Partitioning(ids, labels, k)
