"""Parallel divide-and-conquer Delaunay triangulation.

The input is divided (sample-based graph partitioning or cyclic median
splits), partitions are triangulated concurrently, simplices whose
circumsphere reaches another partition are collected as the border, the
border vertices are triangulated, and the pieces are merged with neighbor
links repaired by facet matching.
"""

import threading
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .bordergeom import (BBOX, EXACT, GRID, IntersectionPolicy, PackedIndices,
                         _all_points_insphere, _halfspace_hits,
                         _sphere_hits_exact, _sphere_hits_grid,
                         build_grid_index, point_spacing)
from .geometry import (box_sphere_kernel, circumsphere_ids,
                       filter_radius_squared, halfspace_box_kernel,
                       orient_facet_point, orient_ids)
from .samplepart import (PartitionConfig, PartitionWarning, cyclic_partition,
                         cyclic_split, partition_points)
from .seqdt import affinely_independent, triangulate_seq
from .tristore import (INFINITE, NONE, Triangulation, _facet_keys,
                       _key_of_ids, hull_simplices)


class InconsistentMerge(RuntimeError):
    pass


class DanglingFacet(RuntimeError):
    pass


STRATEGIES = ("kway", "bisect")
DIVIDERS = ("sample", "cyclic")


@dataclass
class DcConfig:
    """Parameters of :func:`delaunay_dc`.

    ``k`` defaults to ``threads`` for the k-way strategy.
    """

    base_case_threshold: int = 10000
    strategy: str = "kway"
    divider: str = "sample"
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    policy: IntersectionPolicy = field(default_factory=IntersectionPolicy)
    k: int = None
    threads: int = 1
    seed: int = 0
    nested_border: bool = True

    def __post_init__(self):
        if self.strategy == "recursive_bisection":
            self.strategy = "bisect"
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.divider not in DIVIDERS:
            raise ValueError(f"unknown divider {self.divider!r}")
        if isinstance(self.policy, str):
            self.policy = IntersectionPolicy.parse(self.policy)
        if self.k is None:
            self.k = max(1, self.threads)
        if self.k < 1 or self.threads < 1:
            raise ValueError("k and threads must be >= 1")
        if self.base_case_threshold < 4:
            raise ValueError("base_case_threshold must be >= D+2")
        if (self.strategy == "bisect" or self.divider == "cyclic") and \
                self.k & (self.k - 1):
            raise ValueError("k must be a power of two for this strategy")


@dataclass
class BorderSet:
    simplices: list
    border_vertex_ids: np.ndarray


@dataclass
class MergeRecord:
    depth: int
    n: int
    parts: list
    sample_size: int
    border_vertex_ids: np.ndarray
    cut: int = 0
    path: tuple = ()


@dataclass
class DcStats:
    """Instrumentation of one :func:`delaunay_dc` call (main level only)."""

    n: int = 0
    divides: int = 0
    merges: int = 0
    records: list = field(default_factory=list)
    nested_merges: int = 0
    times: dict = field(default_factory=lambda: {
        "divide": 0.0, "partial": 0.0, "border_detect": 0.0,
        "border_dt": 0.0, "merge": 0.0, "repair": 0.0})
    total_time: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def sample_sizes(self):
        return [r.sample_size for r in self.records]

    @property
    def border_vertex_counts(self):
        return [int(r.border_vertex_ids.shape[0]) for r in self.records]

    @property
    def leaf_sizes(self):
        """Sizes of the sequentially triangulated parts, in path order."""
        return list(getattr(self, "_leaves", [self.n]))

    def _lock(self):
        if not hasattr(self, "_mutex"):
            self._mutex = threading.Lock()
        return self._mutex


# --------------------------------------------------------------------------
# concurrency helper


class _Pool:
    """Runs task lists with at most ``threads`` concurrent workers.

    Tasks that find no free worker run inline, so nested use never blocks.
    """

    def __init__(self, threads):
        self.sem = threading.Semaphore(max(0, threads - 1))

    def run(self, tasks):
        results = [None] * len(tasks)
        errors = [None] * len(tasks)

        def call(i, release):
            try:
                results[i] = tasks[i]()
            except BaseException as exc:  # re-raised in the caller
                errors[i] = exc
            finally:
                if release:
                    self.sem.release()

        spawned = []
        for i in range(len(tasks) - 1):
            if self.sem.acquire(blocking=False):
                th = threading.Thread(target=call, args=(i, True))
                th.start()
                spawned.append(th)
            else:
                call(i, False)
        if tasks:
            call(len(tasks) - 1, False)
        for th in spawned:
            th.join()
        for e in errors:
            if e is not None:
                raise e
        return results


def _seed(config, path):
    ss = np.random.SeedSequence(config.seed, spawn_key=tuple(path))
    return int(ss.generate_state(1)[0])


# --------------------------------------------------------------------------
# border detection


@njit(cache=True, nogil=True)
def _border_kernel(P, S, NB, seeds, me, roots, node_lo, node_hi, left, right,
                   cell, cell_ptr, cell_pts, pt_off, mode):
    m, nv = S.shape
    dim = nv - 1
    K = roots.shape[0]
    INF = INFINITE
    mark = np.zeros(m, dtype=np.bool_)
    border = np.zeros(m, dtype=np.bool_)
    queue = np.empty(m, dtype=np.int64)
    head = 0
    tail = 0
    for s in seeds:
        if not mark[s]:
            mark[s] = True
            queue[tail] = s
            tail += 1
    center = np.empty(dim)
    corner = np.empty(dim)
    while head < tail:
        s = queue[head]
        head += 1
        hit = False
        if S[s, dim] == INF:
            f0 = S[s, 0]
            f1 = S[s, 1]
            f2 = S[s, 2] if dim == 3 else 0
            nb = NB[s, dim]
            inner = -1
            for t in range(nv):
                w = S[nb, t]
                if w != f0 and w != f1 and (dim == 2 or w != f2):
                    inner = w
            outward = -orient_facet_point(P, f0, f1, f2, P[inner], dim)
            for j in range(K):
                if j == me:
                    continue
                r = roots[j]
                if mode == BBOX:
                    hit = halfspace_box_kernel(P, f0, f1, f2, outward,
                                               node_lo[r], node_hi[r], dim,
                                               corner)
                else:
                    hit = _halfspace_hits(P, r, node_lo, node_hi, left, right,
                                          cell, cell_ptr, cell_pts, f0, f1,
                                          f2, outward, dim, mode == EXACT,
                                          corner)
                if hit:
                    break
        else:
            a = S[s, 0]
            b = S[s, 1]
            c = S[s, 2]
            d = S[s, 3] if dim == 3 else 0
            if orient_ids(P, a, b, c, d, dim) < 0:
                t = a
                a = b
                b = t
            r2, scale, good = circumsphere_ids(P, a, b, c, d, dim, center)
            if not good or r2 < 0.0:
                # too flat for a trustworthy sphere: unbounded for filters
                for j in range(K):
                    if j == me:
                        continue
                    if mode != EXACT:
                        hit = True
                    else:
                        hit = _all_points_insphere(
                            P, cell_pts[pt_off[j]:pt_off[j + 1]], a, b, c, d,
                            dim)
                    if hit:
                        break
            else:
                rf2 = filter_radius_squared(r2, scale)
                for j in range(K):
                    if j == me:
                        continue
                    r = roots[j]
                    if mode == BBOX:
                        hit = box_sphere_kernel(node_lo[r], node_hi[r], center,
                                                rf2)
                    elif mode == GRID:
                        hit = _sphere_hits_grid(r, node_lo, node_hi, left,
                                                right, center, rf2)
                    else:
                        hit = _sphere_hits_exact(P, r, node_lo, node_hi, left,
                                                 right, cell, cell_ptr,
                                                 cell_pts, center, rf2, a, b,
                                                 c, d, dim)
                    if hit:
                        break
        if hit:
            border[s] = True
            for t in range(nv):
                u = NB[s, t]
                if u >= 0 and not mark[u]:
                    mark[u] = True
                    queue[tail] = u
                    tail += 1
    return border


@njit(cache=True, nogil=True)
def _orient_row(P, S, c, j, q, dim):
    # orientation of row c, with slot j replaced by point q when j >= 0
    a = q if j == 0 else S[c, 0]
    b = q if j == 1 else S[c, 1]
    cc = q if j == 2 else S[c, 2]
    d = 0
    if dim == 3:
        d = q if j == 3 else S[c, 3]
    return orient_ids(P, a, b, cc, d, dim)


@njit(cache=True, nogil=True)
def _foreign_seeds(P, S, NB, queries, seed):
    """Finite simplices containing the query points that fall inside the
    convex hull of the triangulation (visibility walk from a hint grid)."""
    m, nv = S.shape
    dim = nv - 1
    INF = INFINITE
    lo = np.full(dim, np.inf)
    hi = np.full(dim, -np.inf)
    nfin = 0
    for s in range(m):
        if S[s, dim] != INF:
            nfin += 1
            for t in range(nv):
                for a in range(dim):
                    lo[a] = min(lo[a], P[S[s, t], a])
                    hi[a] = max(hi[a], P[S[s, t], a])
    out = np.empty(queries.shape[0], dtype=np.int64)
    if nfin == 0:
        return out[:0]
    g = max(1, int((nfin / 2.0) ** (1.0 / dim)))
    inv_w = np.empty(dim)
    for a in range(dim):
        span = hi[a] - lo[a]
        inv_w[a] = g / span if span > 0 else 0.0
    hint = np.full(g ** dim, -1, dtype=np.int64)
    first = -1
    for s in range(m):
        if S[s, dim] == INF:
            continue
        if first < 0:
            first = s
        b = 0
        for a in range(dim):
            x = 0.0
            for t in range(nv):
                x += P[S[s, t], a]
            k = int((x / nv - lo[a]) * inv_w[a])
            b = b * g + min(max(k, 0), g - 1)
        hint[b] = s
    last = first
    for b in range(hint.shape[0]):
        if hint[b] < 0:
            hint[b] = last
        else:
            last = hint[b]
    state = np.uint64(seed) | np.uint64(1)
    cnt = 0
    for q in queries:
        inside = True
        for a in range(dim):
            if P[q, a] < lo[a] or P[q, a] > hi[a]:
                inside = False
        if not inside:
            continue
        b = 0
        for a in range(dim):
            k = int((P[q, a] - lo[a]) * inv_w[a])
            b = b * g + min(max(k, 0), g - 1)
        c = hint[b]
        prev = -1
        steps = 0
        while True:
            if S[c, dim] == INF:
                c = -1
                break
            steps += 1
            if steps > 4 * m + 16:
                # restart from a random finite simplex
                while True:
                    state ^= (state << np.uint64(13))
                    state ^= (state >> np.uint64(7))
                    state ^= (state << np.uint64(17))
                    c = np.int64(state % np.uint64(m))
                    if S[c, dim] != INF:
                        break
                prev = -1
                steps = 0
            o = _orient_row(P, S, c, -1, q, dim)
            state ^= (state << np.uint64(13))
            state ^= (state >> np.uint64(7))
            state ^= (state << np.uint64(17))
            r = np.int64(state % np.uint64(nv))
            moved = False
            for t in range(nv):
                i = (r + t) % nv
                nb = NB[c, i]
                if nb == prev:
                    continue
                if _orient_row(P, S, c, i, q, dim) == -o:
                    prev = c
                    c = nb
                    moved = True
                    break
            if not moved:
                break
        if c >= 0:
            out[cnt] = c
            cnt += 1
    return out[:cnt]


def find_border(partials, packed, policy, pool=None):
    """Border simplices of every partial triangulation.

    A breadth-first search per partition starts at its hull simplices and
    at the simplices containing points of other partitions; a simplex whose
    circumsphere (outer halfspace for infinite simplices) reaches another
    partition under ``policy`` joins the border and its neighbors are queued.
    The second kind of seed reaches pockets where a foreign point sits inside
    the partition's hull but no chain of conflicting simplices leads from it
    to the hull.
    """
    P = partials[0].points
    pt_off = np.concatenate([[0], np.cumsum([a.shape[0]
                                             for a in packed.all_pts])])
    pt_off = pt_off.astype(np.int64)

    def task(i):
        T = partials[i]
        if packed.k == 1:
            return np.zeros(T.simplices.shape[0], dtype=bool)
        others = np.concatenate([packed.all_pts[j] for j in range(packed.k)
                                 if j != i])
        seeds = np.concatenate([hull_simplices(T), _foreign_seeds(
            P, T.simplices, T.neighbors, others, i + 1)])
        return _border_kernel(P, T.simplices, T.neighbors, seeds, i,
                              packed.roots, packed.node_lo, packed.node_hi,
                              packed.left, packed.right, packed.cell,
                              packed.cell_ptr, packed.cell_pts, pt_off,
                              policy.mode)

    tasks = [lambda i=i: task(i) for i in range(len(partials))]
    masks = (pool or _Pool(1)).run(tasks)
    simplices = [np.flatnonzero(mk) for mk in masks]
    verts = [partials[i].simplices[s].ravel() for i, s in
             enumerate(simplices)]
    allv = np.concatenate(verts) if verts else np.empty(0, dtype=np.int64)
    allv = np.unique(allv[allv != INFINITE])
    return BorderSet(simplices, allv)


# --------------------------------------------------------------------------
# merging and neighbor repair


@njit(cache=True, nogil=True)
def _row_keys(rows):
    out = np.empty(rows.shape[0], dtype=np.uint64)
    for i in range(rows.shape[0]):
        out[i] = _key_of_ids(rows[i])
    return out


@njit(cache=True, nogil=True)
def _rows_member(rows, keys, ref_rows, ref_keys):
    """For each row, whether an equal row exists in ``ref_rows``
    (``ref_keys`` sorted ascending, ``ref_rows`` in the same order)."""
    out = np.zeros(rows.shape[0], dtype=np.bool_)
    nv = rows.shape[1]
    for i in range(rows.shape[0]):
        k = keys[i]
        j = np.searchsorted(ref_keys, k)
        while j < ref_keys.shape[0] and ref_keys[j] == k:
            same = True
            for t in range(nv):
                if rows[i, t] != ref_rows[j, t]:
                    same = False
                    break
            if same:
                out[i] = True
                break
            j += 1
    return out


@njit(cache=True, nogil=True)
def _same_facet(S, s, d, u, e, nv):
    # rows are sorted, so facets compare slot by slot
    i = 0
    j = 0
    while i < nv and j < nv:
        if i == d:
            i += 1
            continue
        if j == e:
            j += 1
            continue
        if S[s, i] != S[u, j]:
            return False
        i += 1
        j += 1
    return True


@njit(cache=True, nogil=True)
def _match_open(S, NB, alive, start):
    """Pair up open facets (``NB == -1``) of live simplices ``>= start``
    with open facets of any live simplex by facet key plus verification.

    Returns ``(status, open_s, open_d)``: status 1 means a facet has more
    than two owners; the open arrays list facets left unmatched.
    """
    m, nv = S.shape
    cnt = 0
    for s in range(m):
        if alive[s]:
            for d in range(nv):
                if NB[s, d] < 0:
                    cnt += 1
    fs = np.empty(cnt, dtype=np.int64)
    fd = np.empty(cnt, dtype=np.int64)
    keys = np.empty(cnt, dtype=np.uint64)
    ids = np.empty(nv - 1, dtype=np.int64)
    cnt = 0
    for s in range(m):
        if alive[s]:
            for d in range(nv):
                if NB[s, d] < 0:
                    t = 0
                    for u in range(nv):
                        if u != d:
                            ids[t] = S[s, u]
                            t += 1
                    fs[cnt] = s
                    fd[cnt] = d
                    keys[cnt] = _key_of_ids(ids)
                    cnt += 1
    order = np.argsort(keys, kind="mergesort")
    matched = np.zeros(cnt, dtype=np.bool_)
    status = 0
    i = 0
    while i < cnt:
        j = i
        while j < cnt and keys[order[j]] == keys[order[i]]:
            j += 1
        for a in range(i, j):
            oa = order[a]
            if matched[oa]:
                continue
            for b in range(a + 1, j):
                ob = order[b]
                if matched[ob]:
                    continue
                if _same_facet(S, fs[oa], fd[oa], fs[ob], fd[ob], nv):
                    if fs[oa] < start and fs[ob] < start:
                        # two old simplices never lose their link
                        continue
                    NB[fs[oa], fd[oa]] = fs[ob]
                    NB[fs[ob], fd[ob]] = fs[oa]
                    matched[oa] = True
                    matched[ob] = True
                    break
        # a third copy of an already paired facet means a duplicate
        for a in range(i, j):
            oa = order[a]
            if matched[oa]:
                continue
            for b in range(i, j):
                ob = order[b]
                if matched[ob] and _same_facet(S, fs[oa], fd[oa], fs[ob],
                                               fd[ob], nv):
                    status = 1
        i = j
    nopen = 0
    for a in range(cnt):
        if not matched[a]:
            nopen += 1
    os_ = np.empty(nopen, dtype=np.int64)
    od = np.empty(nopen, dtype=np.int64)
    nopen = 0
    for a in range(cnt):
        if not matched[a]:
            os_[nopen] = fs[a]
            od[nopen] = fd[a]
            nopen += 1
    return status, os_, od


@njit(cache=True, nogil=True)
def _hull_convex(P, S, NB, first):
    """Local convexity of the hull across every ridge of the infinite
    simplices ``first..m-1``; returns the first offending simplex or -1."""
    m, nv = S.shape
    dim = nv - 1
    for s in range(first, m):
        f0 = S[s, 0]
        f1 = S[s, 1]
        f2 = S[s, 2] if dim == 3 else 0
        owner = NB[s, dim]
        inner = -1
        for t in range(nv):
            w = S[owner, t]
            if w != f0 and w != f1 and (dim == 2 or w != f2):
                inner = w
        outward = -orient_facet_point(P, f0, f1, f2, P[inner], dim)
        for j in range(dim):
            u = NB[s, j]
            for t in range(dim):
                w = S[u, t]
                if w != f0 and w != f1 and (dim == 2 or w != f2):
                    if orient_facet_point(P, f0, f1, f2, P[w], dim) == outward:
                        return s
    return -1


def update_neighbors(T, Q=None):
    """Link open facets of ``T`` by facet key lookup and verification.

    Only facets whose neighbor is NONE take part, so the call is idempotent.
    ``Q`` (inserted simplex ids) restricts new links to pairs involving at
    least one inserted simplex; by default any pair of open facets may link.

    Returns the unmatched open facets as ``(simplex ids, slots)``.

    Raises
    ------
    InconsistentMerge
        If a facet is shared by more than two live simplices.
    """
    start = 0 if Q is None or len(Q) == 0 else int(np.min(Q))
    status, os_, od = _match_open(T.simplices, T.neighbors, T.alive, start)
    T.invalidate_index()
    if status:
        raise InconsistentMerge("a facet is shared by more than two simplices")
    return os_, od


def _close_hull(T):
    """Cap every open finite facet with an infinite simplex and link them."""
    os_, od = update_neighbors(T)
    dim = T.dim
    if os_.size == 0:
        raise DanglingFacet("merged triangulation has no hull")
    if np.any(T.simplices[os_, -1] == INFINITE):
        raise DanglingFacet("open facet on an infinite simplex")
    m0 = T.simplices.shape[0]
    fac = np.sort(np.stack([np.delete(T.simplices[s], d) for s, d in
                            zip(os_.tolist(), od.tolist())]), axis=1)
    rows = np.concatenate([fac, np.full((fac.shape[0], 1), INFINITE,
                                        dtype=np.int64)], axis=1)
    nb = np.full(rows.shape, NONE, dtype=np.int64)
    nb[:, dim] = os_
    T.simplices = np.concatenate([T.simplices, rows])
    T.neighbors = np.concatenate([T.neighbors, nb])
    T.neighbors[os_, od] = np.arange(m0, m0 + rows.shape[0])
    T.alive = np.concatenate([T.alive, np.ones(rows.shape[0], dtype=bool)])
    T.origin = np.concatenate([T.origin, np.full(rows.shape[0], NONE,
                                                 dtype=np.int32)])
    T.border = np.concatenate([T.border, np.zeros(rows.shape[0], dtype=bool)])
    status, left, _ = _match_open(T.simplices, T.neighbors, T.alive, m0)
    if status or left.size:
        raise DanglingFacet(f"{left.size} hull ridges left unmatched")
    bad = _hull_convex(T.points, T.simplices, T.neighbors, m0)
    if bad >= 0:
        raise DanglingFacet(f"hull is not convex at simplex {bad}")
    T.invalidate_index()


def merge(partials, border, T_B, labels):
    """Stitch partial triangulations with the border triangulation.

    Parameters
    ----------
    partials : list of Triangulation
    border : BorderSet
    T_B : Triangulation of ``border.border_vertex_ids``
    labels : (N,) int array
        Partition of every point id appearing in ``partials``.

    Returns
    -------
    T : Triangulation
        Finite simplices with repaired links and a re-derived hull.
    Q : int array
        Ids of simplices inserted from ``T_B``.
    """
    P = partials[0].points
    nv = P.shape[1] + 1
    rows_l, nb_l, org_l = [], [], []
    offset = 0
    border_rows = []
    for i, T in enumerate(partials):
        keep = T.alive & ~T.infinite
        bmask = np.zeros(keep.shape[0], dtype=bool)
        bmask[border.simplices[i]] = True
        border_rows.append(T.simplices[bmask & ~T.infinite])
        keep &= ~bmask
        remap = np.full(keep.shape[0] + 1, NONE, dtype=np.int64)
        idx = np.flatnonzero(keep)
        remap[idx] = offset + np.arange(idx.shape[0])
        nb = T.neighbors[idx]
        rows_l.append(T.simplices[idx])
        nb_l.append(remap[np.where(nb >= 0, nb, -1)])
        org_l.append(np.full(idx.shape[0], i, dtype=np.int32))
        offset += idx.shape[0]
    n_old = offset

    # border-triangulation simplices to insert
    fin = T_B.finite_live if T_B is not None else np.empty(0, np.int64)
    cand = T_B.simplices[fin] if T_B is not None else \
        np.empty((0, nv), dtype=np.int64)
    lab = labels[cand] if cand.size else np.empty((0, nv), dtype=np.int64)
    spans = lab.min(axis=1) != lab.max(axis=1) if cand.size else \
        np.empty(0, dtype=bool)
    ref = np.concatenate(border_rows) if border_rows else \
        np.empty((0, nv), dtype=np.int64)
    ref_keys = _row_keys(ref)
    o = np.argsort(ref_keys, kind="stable")
    ref, ref_keys = np.ascontiguousarray(ref[o]), ref_keys[o]
    single = np.flatnonzero(~spans)
    member = np.zeros(cand.shape[0], dtype=bool)
    if single.size:
        rows = np.ascontiguousarray(cand[single])
        member[single] = _rows_member(rows, _row_keys(rows), ref, ref_keys)
    take = spans | member
    idx = fin[take]
    if idx.size:
        ck = _row_keys(np.ascontiguousarray(T_B.simplices[idx]))
        if np.unique(ck).size != ck.size:
            # hash collision or duplicate; confirm exactly
            if np.unique(T_B.simplices[idx], axis=0).shape[0] != idx.size:
                raise InconsistentMerge("border simplex inserted twice")
    remap = np.full(T_B.simplices.shape[0] + 1 if T_B is not None else 1,
                    NONE, dtype=np.int64)
    remap[idx] = n_old + np.arange(idx.shape[0])
    if idx.size:
        nb = T_B.neighbors[idx]
        rows_l.append(T_B.simplices[idx])
        nb_l.append(remap[np.where(nb >= 0, nb, -1)])
        org_l.append(np.full(idx.shape[0], NONE, dtype=np.int32))

    S = np.concatenate(rows_l) if rows_l else np.empty((0, nv), np.int64)
    NB = np.concatenate(nb_l) if nb_l else np.empty((0, nv), np.int64)
    T = Triangulation(P, S, NB, np.concatenate(org_l) if org_l else None)
    Q = np.arange(n_old, n_old + idx.shape[0])
    return T, Q


# --------------------------------------------------------------------------
# divide


def _fix_parts(points, ids, labels, k, sink):
    """Fold parts that cannot be triangulated (too small or flat) into the
    part of their nearest foreign point; drop empty parts."""
    dim = points.shape[1]
    labels = labels.copy()
    while True:
        present = np.unique(labels)
        if present.size <= 1:
            break
        bad = None
        for j in present.tolist():
            members = ids[labels == j]
            if members.size < dim + 2 or not affinely_independent(points,
                                                                   members):
                bad = j
                break
        if bad is None:
            break
        inside = labels == bad
        other = np.flatnonzero(~inside)
        tree = cKDTree(points[ids[other]])
        _, near = tree.query(points[ids[inside]])
        labels[inside] = labels[other[near]]
        sink.append(f"part {bad} with {int(inside.sum())} points folded into "
                    f"neighbors")
    present = np.unique(labels)
    if present.size < k:
        sink.append(f"{k - present.size} of {k} parts dropped")
    compact = np.searchsorted(present, labels)
    return compact, present.size


def _divide(points, ids, k, depth, config, path, sink):
    """Returns ``(labels over ids, k', sample size, cut)``."""
    if config.divider == "cyclic":
        if config.strategy == "bisect":
            a, b = cyclic_split(points, ids, depth % points.shape[1])
            lab = np.isin(ids, b).astype(np.int64)
            return lab, 2, 0, 0
        part = cyclic_partition(points, k, ids)
        return part.labels, k, 0, 0
    pc = replace(config.partition, k=k, seed=_seed(config, path + (1,)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PartitionWarning)
        part = partition_points(points, pc, ids)
    sink.extend(part.warnings)
    return part.labels, k, int(part.sample_point_ids.shape[0]), int(part.cut)


# --------------------------------------------------------------------------
# driver


def _phase_times(intervals):
    """Wall time per phase from possibly overlapping ``(key, t0, t1)``.

    Every instant counts once, for the innermost (latest started) active
    interval, so the phases sum to at most the covered wall time.
    """
    out = {}
    if not intervals:
        return out
    cuts = sorted({t for _, a, b in intervals for t in (a, b)})
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        best = None
        for key, a, b in intervals:
            if a <= lo and hi <= b and (best is None or a > best[1]):
                best = (key, a)
        if best is not None:
            out[best[0]] = out.get(best[0], 0.0) + (hi - lo)
    return out


class _Run:
    def __init__(self, points, config, stats, pool, main):
        self.points = points
        self.config = config
        self.stats = stats
        self.pool = pool
        self.main = main
        self.leaves = []
        self.intervals = []

    def _t(self, key, t0):
        if self.main:
            t1 = time.perf_counter()
            with self.stats._lock():
                self.intervals.append((key, t0, t1))

    def seq(self, ids, path):
        t0 = time.perf_counter()
        T = triangulate_seq(self.points, ids, seed=_seed(self.config, path))
        self._t("partial", t0)
        with self.stats._lock():
            self.leaves.append((tuple(path), int(ids.shape[0])))
        return T

    def node(self, ids, k, depth, path):
        cfg = self.config
        dim = self.points.shape[1]
        kk = 2 if cfg.strategy == "bisect" else k
        if k == 1 or ids.shape[0] < kk * (dim + 2):
            return self.seq(ids, path)
        t0 = time.perf_counter()
        sink = []
        labels, kk, eta, cut = _divide(self.points, ids, kk, depth, cfg,
                                       tuple(path), sink)
        labels, kk = _fix_parts(self.points, ids, labels, kk, sink)
        self._t("divide", t0)
        with self.stats._lock():
            self.stats.warnings.extend(sink)
            if self.main:
                self.stats.divides += 1
        if kk == 1:
            return self.seq(ids, path)
        parts = [ids[labels == j] for j in range(kk)]
        if cfg.strategy == "bisect":
            sub = [k // 2, k - k // 2]
            tasks = [lambda j=j: self.node(parts[j], sub[j], depth + 1,
                                           path + (j,))
                     for j in range(kk)]
        else:
            tasks = [lambda j=j: self.seq(parts[j], path + (j,))
                     for j in range(kk)]
        partials = self.pool.run(tasks)
        return self.stitch(ids, parts, labels, partials, depth, path, eta, cut)

    def stitch(self, ids, parts, labels, partials, depth, path, eta, cut):
        cfg = self.config
        P = self.points
        t0 = time.perf_counter()
        spacing = point_spacing(P, ids)
        indices = self.pool.run([
            lambda p=p: build_grid_index(P, p, cfg.policy.c_G, spacing)
            for p in parts])
        packed = PackedIndices(indices)
        border = find_border(partials, packed, cfg.policy, self.pool)
        self._t("border_detect", t0)

        t0 = time.perf_counter()
        V = border.border_vertex_ids
        T_B = None
        if V.shape[0] >= P.shape[1] + 1:
            if cfg.nested_border and self.main and \
                    V.shape[0] >= cfg.base_case_threshold:
                sub = _Run(P, cfg, self.stats, self.pool, main=False)
                T_B = sub.top(V, tuple(path) + (7,))
            else:
                T_B = triangulate_seq(P, V, seed=_seed(cfg, tuple(path) +
                                                       (7,)))
        self._t("border_dt", t0)

        t0 = time.perf_counter()
        glob = np.full(P.shape[0], -1, dtype=np.int64)
        glob[ids] = labels
        T, Q = merge(partials, border, T_B, glob)
        self._t("merge", t0)
        t0 = time.perf_counter()
        _close_hull(T)
        self._t("repair", t0)
        with self.stats._lock():
            if self.main:
                self.stats.merges += 1
                self.stats.records.append(MergeRecord(
                    depth, int(ids.shape[0]), [int(p.shape[0]) for p in parts],
                    eta, V, cut, tuple(path)))
            else:
                self.stats.nested_merges += 1
        return T

    def top(self, ids, path=()):
        cfg = self.config
        if ids.shape[0] < cfg.base_case_threshold:
            return self.seq(ids, path)
        return self.node(ids, cfg.k, 0, tuple(path))


def delaunay_dc(points, config=None, ids=None, return_stats=False):
    """Delaunay triangulation by sample-partitioned divide and conquer.

    Parameters
    ----------
    points : (N, D) float array
    config : DcConfig
    ids : int array, optional
        Subset of points (default: all).
    return_stats : bool
        Also return the :class:`DcStats` of the run.

    Returns
    -------
    Triangulation, or ``(Triangulation, DcStats)``
    """
    config = config or DcConfig()
    points = np.ascontiguousarray(points, dtype=np.float64)
    if ids is None:
        ids = np.arange(points.shape[0], dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    dim = points.shape[1]
    if ids.shape[0] < dim + 2:
        raise ValueError(f"need at least {dim + 2} points")
    stats = DcStats(n=int(ids.shape[0]))
    run = _Run(points, config, stats, _Pool(config.threads), main=True)
    t0 = time.perf_counter()
    T = run.top(ids)
    stats.total_time = time.perf_counter() - t0
    stats._leaves = [s for _, s in sorted(run.leaves)]
    stats.records.sort(key=lambda r: r.path)
    stats.times.update(_phase_times(run.intervals))
    T.stats = stats
    return (T, stats) if return_stats else T
