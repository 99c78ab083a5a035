"""Simplex store with neighbor links, an explicit infinite vertex and a
facet-hash index, plus canonical forms and a brute-force validity oracle.

Simplices are rows of ``D + 1`` global point ids sorted ascending. The
infinite vertex is the sentinel :data:`INFINITE`, which sorts last.
``neighbors[s, d]`` is the simplex sharing the facet opposite
``simplices[s, d]`` or :data:`NONE`.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import (circumsphere_ids, filter_radius_squared, insphere_ids,
                       orient_ids)

INFINITE = np.iinfo(np.int64).max
NONE = -1

DEFAULT_ORACLE_LIMIT = 20000


class OracleLimitExceeded(ValueError):
    pass


# --------------------------------------------------------------------------
# facet hashing


@njit(cache=True, nogil=True)
def _mix64(x):
    # splitmix64 finalizer
    z = np.uint64(x) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _combine(s, x):
    rot = (x << np.uint64(29)) | (x >> np.uint64(35))
    return _mix64(s ^ rot)


@njit(cache=True, nogil=True)
def _facet_keys(simplices):
    m, nv = simplices.shape
    out = np.empty((m, nv), dtype=np.uint64)
    for s in range(m):
        for d in range(nv):
            acc_s = np.uint64(0)
            acc_x = np.uint64(0)
            for t in range(nv):
                if t != d:
                    h = _mix64(simplices[s, t])
                    acc_s += h
                    acc_x ^= h
            out[s, d] = _combine(acc_s, acc_x)
    return out


@njit(cache=True, nogil=True)
def _key_of_ids(ids):
    acc_s = np.uint64(0)
    acc_x = np.uint64(0)
    for t in range(ids.shape[0]):
        h = _mix64(ids[t])
        acc_s += h
        acc_x ^= h
    return _combine(acc_s, acc_x)


def facet_key(simplex, d):
    """Order-independent 64-bit key of the facet opposite vertex ``d``."""
    row = np.asarray(simplex, dtype=np.int64)
    if not 0 <= d < row.shape[0]:
        raise IndexError("facet index out of range")
    return int(_key_of_ids(np.delete(row, d)))


def facet_key_of(vertex_ids):
    """Key of a facet given directly by its D vertex ids."""
    return int(_key_of_ids(np.asarray(vertex_ids, dtype=np.int64)))


class FacetIndex:
    """Sorted multimap facet key -> (simplex id, facet slot) over live simplices.

    Built in one batch; lookups are read-only and safe from many threads.
    """

    def __init__(self, simplices, alive):
        keys = _facet_keys(simplices)
        live = np.flatnonzero(alive)
        nv = simplices.shape[1]
        flat = keys[live].ravel()
        order = np.argsort(flat, kind="stable")
        self.keys = flat[order]
        self.simplex = np.repeat(live, nv)[order]
        self.slot = np.tile(np.arange(nv), live.shape[0])[order]

    def candidates(self, key):
        key = np.uint64(key)
        lo = np.searchsorted(self.keys, key, side="left")
        hi = np.searchsorted(self.keys, key, side="right")
        return self.simplex[lo:hi]

    def __len__(self):
        return self.keys.shape[0]


# --------------------------------------------------------------------------
# triangulation


class Triangulation:
    """Simplices over a shared global point array.

    Parameters
    ----------
    points : (N, D) float array
        Coordinates of the owning point set; simplices refer to row ids.
    simplices, neighbors : (m, D+1) int64 arrays
    """

    def __init__(self, points, simplices, neighbors, origin=None):
        self.points = points
        self.dim = points.shape[1]
        self.simplices = np.ascontiguousarray(simplices, dtype=np.int64)
        self.neighbors = np.ascontiguousarray(neighbors, dtype=np.int64)
        m = self.simplices.shape[0]
        self.alive = np.ones(m, dtype=bool)
        if origin is None:
            origin = np.full(m, NONE, dtype=np.int32)
        self.origin = np.asarray(origin, dtype=np.int32)
        self.border = np.zeros(m, dtype=bool)
        self._facet_index = None

    @classmethod
    def empty(cls, points):
        nv = points.shape[1] + 1
        z = np.empty((0, nv), dtype=np.int64)
        return cls(points, z, z.copy())

    def __len__(self):
        return int(self.alive.sum())

    @property
    def infinite(self):
        return self.simplices[:, -1] == INFINITE

    @property
    def finite_live(self):
        return np.flatnonzero(self.alive & ~self.infinite)

    @property
    def n_finite(self):
        return int((self.alive & ~self.infinite).sum())

    def vertex_ids(self):
        rows = self.simplices[self.finite_live]
        return np.unique(rows)

    @property
    def facet_index(self):
        if self._facet_index is None:
            self._facet_index = FacetIndex(self.simplices, self.alive)
        return self._facet_index

    def invalidate_index(self):
        self._facet_index = None

    def kill(self, ids):
        """Tombstone simplices; links pointing at them become dangling."""
        self.alive[ids] = False
        self._facet_index = None

    def compact(self):
        """Drop tombstones and renumber simplices and neighbor links."""
        live = np.flatnonzero(self.alive)
        remap = np.full(self.simplices.shape[0] + 1, NONE, dtype=np.int64)
        remap[live] = np.arange(live.shape[0])
        nb = self.neighbors[live]
        nb = np.where(nb >= 0, remap[nb], NONE)
        self.simplices = self.simplices[live]
        self.neighbors = nb
        self.origin = self.origin[live]
        self.border = self.border[live]
        self.alive = np.ones(live.shape[0], dtype=bool)
        self._facet_index = None
        return remap[:-1]

    def save_csv(self, path, id_map=None, n_points=None):
        save_triangulation_csv(self, path, id_map, n_points)


def hull_simplices(T):
    """Infinite simplices plus finite simplices sharing a facet with one."""
    if T.simplices.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    inf = T.alive & T.infinite
    nb = T.neighbors
    touches = np.zeros(T.simplices.shape[0], dtype=bool)
    valid = nb >= 0
    touches[np.any(valid & inf[np.where(valid, nb, 0)], axis=1)] = True
    return np.flatnonzero(inf | (touches & T.alive))


def canonicalize(T):
    """Finite simplices as a lexicographically sorted ``(m, D+1)`` array."""
    rows = np.sort(T.simplices[T.finite_live], axis=1)
    if rows.shape[0] == 0:
        return rows
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def canonical_list(T):
    return [tuple(r) for r in canonicalize(T).tolist()]


# --------------------------------------------------------------------------
# validity oracle


@dataclass
class ValidityReport:
    empty_sphere: list = field(default_factory=list)
    n_empty_sphere: int = 0
    facet_sharing: list = field(default_factory=list)
    neighbor_symmetry: list = field(default_factory=list)
    uncovered: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)
    volume_error: float = 0.0

    @property
    def ok(self):
        return (self.n_empty_sphere == 0 and not self.facet_sharing
                and not self.neighbor_symmetry and not self.uncovered
                and not self.degenerate and self.volume_error <= 1e-9)

    def summary(self):
        if self.ok:
            return "ok"
        return (f"empty_sphere={self.n_empty_sphere} "
                f"facet_sharing={len(self.facet_sharing)} "
                f"neighbor_symmetry={len(self.neighbor_symmetry)} "
                f"uncovered={len(self.uncovered)} "
                f"degenerate={len(self.degenerate)} "
                f"volume_error={self.volume_error:.3g}")


@njit(cache=True, nogil=True)
def _positive(P, rows, dim):
    """Copy of rows reordered to positive orientation; degenerate -> flag."""
    out = rows.copy()
    flat = np.zeros(rows.shape[0], dtype=np.bool_)
    for s in range(rows.shape[0]):
        v = out[s]
        o = orient_ids(P, v[0], v[1], v[2], v[3] if dim == 3 else 0, dim)
        if o < 0:
            t = v[0]
            v[0] = v[1]
            v[1] = t
        elif o == 0:
            flat[s] = True
    return out, flat


@njit(cache=True, nogil=True)
def _empty_sphere_brute(P, rows, flat, ids, dim, max_report):
    found = np.empty((max_report, 2), dtype=np.int64)
    count = 0
    for s in range(rows.shape[0]):
        if flat[s]:
            continue
        v = rows[s]
        for q in ids:
            if insphere_ids(P, v[0], v[1], v[2], v[3] if dim == 3 else 0,
                            q, dim) > 0:
                if count < max_report:
                    found[count, 0] = s
                    found[count, 1] = q
                count += 1
    return found[:min(count, max_report)], count


@njit(cache=True, nogil=True)
def _empty_sphere_grid(P, rows, flat, ids, dim, max_report):
    # bucket the query points on a uniform grid, then test each simplex only
    # against points inside the (inflated) bounding box of its circumsphere
    n = ids.shape[0]
    lo = np.empty(dim)
    hi = np.empty(dim)
    for a in range(dim):
        lo[a] = np.inf
        hi[a] = -np.inf
    for q in ids:
        for a in range(dim):
            lo[a] = min(lo[a], P[q, a])
            hi[a] = max(hi[a], P[q, a])
    g = max(1, int((n / 2.0) ** (1.0 / dim)))
    width = np.empty(dim)
    for a in range(dim):
        width[a] = max(hi[a] - lo[a], 1e-300) / g
    ncell = g ** dim
    cell_of = np.empty(n, dtype=np.int64)
    counts = np.zeros(ncell + 1, dtype=np.int64)
    for t in range(n):
        q = ids[t]
        c = 0
        for a in range(dim):
            k = int((P[q, a] - lo[a]) / width[a])
            k = min(max(k, 0), g - 1)
            c = c * g + k
        cell_of[t] = c
        counts[c + 1] += 1
    for c in range(ncell):
        counts[c + 1] += counts[c]
    fill = counts[:-1].copy()
    bucket = np.empty(n, dtype=np.int64)
    for t in range(n):
        c = cell_of[t]
        bucket[fill[c]] = ids[t]
        fill[c] += 1

    found = np.empty((max_report, 2), dtype=np.int64)
    count = 0
    center = np.empty(dim)
    klo = np.empty(dim, dtype=np.int64)
    khi = np.empty(dim, dtype=np.int64)
    idx = np.empty(dim, dtype=np.int64)
    for s in range(rows.shape[0]):
        if flat[s]:
            continue
        v = rows[s]
        d3 = v[3] if dim == 3 else 0
        r2, scale, good = circumsphere_ids(P, v[0], v[1], v[2], d3, dim,
                                           center)
        if not good or r2 < 0.0:
            for q in ids:
                if insphere_ids(P, v[0], v[1], v[2], d3, q, dim) > 0:
                    if count < max_report:
                        found[count, 0] = s
                        found[count, 1] = q
                    count += 1
            continue
        rf2 = filter_radius_squared(r2, scale)
        rf = np.sqrt(rf2)
        empty = False
        for a in range(dim):
            klo[a] = min(max(int((center[a] - rf - lo[a]) / width[a]), 0),
                         g - 1)
            khi[a] = min(max(int((center[a] + rf - lo[a]) / width[a]), 0),
                         g - 1)
            if center[a] + rf < lo[a] or center[a] - rf > hi[a]:
                empty = True
        if empty:
            continue
        for a in range(dim):
            idx[a] = klo[a]
        while True:
            c = 0
            for a in range(dim):
                c = c * g + idx[a]
            for t in range(counts[c], counts[c + 1]):
                q = bucket[t]
                if q == v[0] or q == v[1] or q == v[2] or (dim == 3
                                                          and q == d3):
                    continue  # own vertices lie on the sphere
                d2 = 0.0
                for a in range(dim):
                    e = P[q, a] - center[a]
                    d2 += e * e
                if d2 <= rf2:
                    if insphere_ids(P, v[0], v[1], v[2], d3, q, dim) > 0:
                        if count < max_report:
                            found[count, 0] = s
                            found[count, 1] = q
                        count += 1
            a = dim - 1
            while a >= 0:
                idx[a] += 1
                if idx[a] <= khi[a]:
                    break
                idx[a] = klo[a]
                a -= 1
            if a < 0:
                break
    return found[:min(count, max_report)], count


@njit(cache=True, nogil=True)
def _neighbor_asymmetry(simplices, neighbors, alive, max_report):
    m, nv = simplices.shape
    bad = np.empty(max_report, dtype=np.int64)
    count = 0
    for s in range(m):
        if not alive[s]:
            continue
        for d in range(nv):
            nb = neighbors[s, d]
            if nb < 0:
                continue
            ok = nb < m and alive[nb]
            if ok:
                back = False
                for e in range(nv):
                    if neighbors[nb, e] == s:
                        back = True
                ok = back
            if ok:
                shared = 0
                for t in range(nv):
                    if t == d:
                        continue
                    for u in range(nv):
                        if simplices[nb, u] == simplices[s, t]:
                            shared += 1
                ok = shared == nv - 1
            if not ok:
                if count < max_report:
                    bad[count] = s
                count += 1
    return bad[:min(count, max_report)]


def _facet_rows(rows):
    nv = rows.shape[1]
    facets = [np.delete(rows, d, axis=1) for d in range(nv)]
    return np.sort(np.concatenate(facets), axis=1)


def _volume_error(P, rows, ids):
    from scipy.spatial import ConvexHull, QhullError

    if rows.shape[0] == 0:
        return 0.0
    dim = P.shape[1]
    V = P[rows]
    E = V[:, 1:] - V[:, :1]
    vol = np.abs(np.linalg.det(E)).sum() / (2.0 if dim == 2 else 6.0)
    try:
        hull = ConvexHull(P[ids])
    except QhullError:
        return np.inf
    return abs(vol - hull.volume) / max(hull.volume, 1e-300)


def validate_delaunay(T, ids=None, limit=DEFAULT_ORACLE_LIMIT,
                      method="grid", max_report=1000):
    """Check T against the Delaunay property and structural invariants.

    Every finite simplex is tested with exact ``in_sphere`` against every
    point in ``ids`` (default: all points of ``T.points``). ``method="grid"``
    skips points that a conservative bucket filter proves to be outside the
    circumsphere; ``method="brute"`` tests every pair.

    Raises
    ------
    OracleLimitExceeded
        If more than ``limit`` points are to be checked.
    """
    P = T.points
    dim = T.dim
    if ids is None:
        ids = np.arange(P.shape[0], dtype=np.int64)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if limit is not None and ids.shape[0] > limit:
        raise OracleLimitExceeded(
            f"{ids.shape[0]} points exceed the oracle limit of {limit}")
    report = ValidityReport()
    finite = T.finite_live
    rows, flat = _positive(P, T.simplices[finite], dim)
    report.degenerate = finite[flat].tolist()

    kernel = _empty_sphere_grid if method == "grid" else _empty_sphere_brute
    if rows.shape[0] and ids.shape[0]:
        found, count = kernel(P, rows, flat, ids, dim, max_report)
        report.empty_sphere = [(int(finite[s]), int(q)) for s, q in found]
        report.n_empty_sphere = int(count)

    # facets: each finite facet in 1 or 2 finite simplices; single-owner
    # facets must appear in exactly one infinite simplex
    if rows.shape[0]:
        facets, counts = np.unique(_facet_rows(T.simplices[finite]), axis=0,
                                   return_counts=True)
        over = facets[counts > 2]
        report.facet_sharing.extend(("over-shared", tuple(f)) for f in
                                    over.tolist())
        hull = facets[counts == 1]
        inf_rows = T.simplices[T.alive & T.infinite][:, :-1]
        inf_facets, inf_counts = np.unique(np.sort(inf_rows, axis=1), axis=0,
                                           return_counts=True)
        report.facet_sharing.extend(("duplicate-infinite", tuple(f)) for f in
                                    inf_facets[inf_counts > 1].tolist())
        if hull.shape[0] != inf_facets.shape[0] or not np.array_equal(
                hull, inf_facets):
            hs = {tuple(f) for f in hull.tolist()}
            is_ = {tuple(f) for f in inf_facets.tolist()}
            report.facet_sharing.extend(("hull-without-infinite", f)
                                        for f in sorted(hs - is_))
            report.facet_sharing.extend(("infinite-without-hull", f)
                                        for f in sorted(is_ - hs))

    report.neighbor_symmetry = _neighbor_asymmetry(
        T.simplices, T.neighbors, T.alive, max_report).tolist()

    covered = np.zeros(P.shape[0], dtype=bool)
    covered[T.simplices[finite].ravel()] = True
    report.uncovered = ids[~covered[ids]].tolist()[:max_report]

    if not report.degenerate and ids.shape[0] > dim:
        report.volume_error = float(_volume_error(P, T.simplices[finite], ids))
    return report


# --------------------------------------------------------------------------
# export


def save_triangulation_csv(T, path, id_map=None, n_points=None):
    """Write the finite simplices, one sorted id row per line.

    ``id_map`` renames vertex ids (e.g. back to rows of a file that held
    duplicates); ``n_points`` overrides the header point count.
    """
    rows = canonicalize(T)
    if id_map is not None and rows.size:
        rows = np.sort(np.asarray(id_map)[rows], axis=1)
        rows = rows[np.lexsort(rows.T[::-1])]
    if n_points is None:
        n_points = T.points.shape[0]
    with open(path, "w") as fh:
        fh.write(f"# dim={T.dim} n_points={n_points} "
                 f"n_simplices={rows.shape[0]}\n")
        np.savetxt(fh, rows, fmt="%d", delimiter=",")


def load_triangulation_csv(path):
    """Read a triangulation export; returns ``(header dict, rows)``."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing '# dim=...' header line")
        meta = dict(tok.split("=") for tok in header[1:].split())
        meta = {k: int(v) for k, v in meta.items()}
        rows = np.loadtxt(fh, dtype=np.int64, delimiter=",", ndmin=2)
    if rows.size == 0:
        rows = np.empty((0, meta["dim"] + 1), dtype=np.int64)
    if rows.shape[1] != meta["dim"] + 1 or rows.shape[0] != meta["n_simplices"]:
        raise ValueError("triangulation file does not match its header")
    return meta, rows


def from_rows(points, rows):
    """Build a linked triangulation (with infinite simplices) from finite rows.

    Neighbor links are recovered by facet matching; facets with a single
    owner get an infinite simplex.
    """
    rows = np.sort(np.asarray(rows, dtype=np.int64), axis=1)
    m, nv = rows.shape
    fac = np.concatenate([np.delete(rows, d, axis=1) for d in range(nv)])
    owner = np.tile(np.arange(m), nv)
    slot = np.repeat(np.arange(nv), m)
    _, inv, counts = np.unique(fac, axis=0, return_inverse=True,
                               return_counts=True)
    inv = inv.ravel()
    hull = counts[inv] == 1
    inf_rows = np.concatenate(
        [fac[hull], np.full((hull.sum(), 1), INFINITE, dtype=np.int64)],
        axis=1)
    simplices = np.concatenate([rows, inf_rows])
    T = Triangulation(points, simplices,
                      np.full(simplices.shape, NONE, dtype=np.int64))
    link_all(T)
    return T


def link_all(T):
    """Recompute every neighbor link from scratch by facet matching."""
    S = T.simplices
    m, nv = S.shape
    live = np.flatnonzero(T.alive)
    fac = np.concatenate([np.delete(S[live], d, axis=1) for d in range(nv)])
    owner = np.tile(live, nv)
    slot = np.repeat(np.arange(nv), live.shape[0])
    order = np.lexsort(fac.T[::-1])
    fac = fac[order]
    owner = owner[order]
    slot = slot[order]
    same = np.all(fac[1:] == fac[:-1], axis=1)
    T.neighbors[:] = NONE
    i = np.flatnonzero(same)
    T.neighbors[owner[i], slot[i]] = owner[i + 1]
    T.neighbors[owner[i + 1], slot[i + 1]] = owner[i]
    T.invalidate_index()
