"""Balanced k-way graph partitioning by multilevel recursive bisection.

Coarsening uses heavy-edge matching, the coarsest graph is bisected by
greedy graph growing, and boundary Fiduccia-Mattheyses passes refine the
cut while the bisection is projected back to the input graph.
"""

import heapq
import math
from dataclasses import dataclass, field

import numpy as np


class InfeasibleBalance(ValueError):
    pass


class SampleGraph:
    """Undirected graph in CSR form with positive integer edge weights.

    Parameters
    ----------
    n : int
        Vertex count.
    edges : (m, 2) int array
        Undirected edges, each listed once.
    weights : (m,) int array
        Positive edge weights.
    coords : (n, D) array, optional
        Vertex coordinates, kept for diagnostics.
    """

    def __init__(self, n, edges, weights, coords=None, vwgt=None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(weights, dtype=np.int64).reshape(-1)
        if edges.shape[0] != weights.shape[0]:
            raise ValueError("one weight per edge required")
        if weights.size and weights.min() < 1:
            raise ValueError("edge weights must be >= 1")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self loops are not allowed")
        self.n = int(n)
        self.coords = coords
        self.vwgt = (np.ones(n, dtype=np.int64) if vwgt is None
                     else np.asarray(vwgt, dtype=np.int64))
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        w = np.concatenate([weights, weights])
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        # merge parallel edges
        if src.size:
            keep = np.ones(src.size, dtype=bool)
            keep[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])
            grp = np.cumsum(keep) - 1
            w = np.bincount(grp, weights=w).astype(np.int64)
            src, dst = src[keep], dst[keep]
        self.xadj = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.xadj, src + 1, 1)
        np.cumsum(self.xadj, out=self.xadj)
        self.adjncy = dst
        self.adjwgt = w

    @property
    def edge_count(self):
        return self.adjncy.shape[0] // 2

    def neighbors(self, v):
        a, b = self.xadj[v], self.xadj[v + 1]
        return self.adjncy[a:b], self.adjwgt[a:b]

    def adjacency(self):
        """Per-vertex list of ``(neighbor, weight)`` pairs."""
        return [list(zip(*(x.tolist() for x in self.neighbors(v))))
                for v in range(self.n)]

    def edge_list(self):
        src = np.repeat(np.arange(self.n), np.diff(self.xadj))
        once = src < self.adjncy
        return np.stack([src[once], self.adjncy[once]], axis=1), \
            self.adjwgt[once]

    def subgraph(self, vertices):
        vertices = np.asarray(vertices, dtype=np.int64)
        local = np.full(self.n, -1, dtype=np.int64)
        local[vertices] = np.arange(vertices.shape[0])
        e, w = self.edge_list()
        a, b = local[e[:, 0]], local[e[:, 1]]
        keep = (a >= 0) & (b >= 0)
        coords = None if self.coords is None else self.coords[vertices]
        return SampleGraph(vertices.shape[0], np.stack([a[keep], b[keep]], 1),
                           w[keep], coords, self.vwgt[vertices])

    def save_metis(self, path):
        save_metis(self, path)


@dataclass
class GraphPartition:
    labels: np.ndarray
    k: int
    epsilon: float
    trace: list = field(default_factory=list, repr=False)

    def sizes(self):
        return np.bincount(self.labels, minlength=self.k)


def max_part_size(n, k, epsilon):
    return int(math.floor((1.0 + epsilon) * math.ceil(n / k) + 1e-9))


def cut_weight(G, labels):
    """Total weight of edges whose endpoints carry different labels."""
    labels = np.asarray(labels)
    src = np.repeat(np.arange(G.n), np.diff(G.xadj))
    cross = labels[src] != labels[G.adjncy]
    return int(G.adjwgt[cross].sum()) // 2


def save_metis(G, path):
    """Write the graph in METIS adjacency format with edge weights."""
    with open(path, "w") as fh:
        fh.write(f"{G.n} {G.edge_count} 001\n")
        for v in range(G.n):
            nb, w = G.neighbors(v)
            fh.write(" ".join(f"{a + 1} {b}" for a, b in zip(nb.tolist(),
                                                             w.tolist())))
            fh.write("\n")


def load_metis(path):
    with open(path) as fh:
        head = fh.readline().split()
        n, m = int(head[0]), int(head[1])
        edges, weights = [], []
        for v in range(n):
            tok = [int(t) for t in fh.readline().split()]
            for a, w in zip(tok[::2], tok[1::2]):
                if v < a - 1:
                    edges.append((v, a - 1))
                    weights.append(w)
    if len(edges) != m:
        raise ValueError("edge count does not match header")
    return SampleGraph(n, np.array(edges, dtype=np.int64).reshape(-1, 2),
                       np.array(weights, dtype=np.int64))


# --------------------------------------------------------------------------
# coarsening


def _heavy_edge_matching(G, rng, max_vwgt):
    n = G.n
    match = np.full(n, -1, dtype=np.int64)
    xadj, adj, wgt, vw = G.xadj, G.adjncy, G.adjwgt, G.vwgt
    for v in rng.permutation(n):
        if match[v] >= 0:
            continue
        best, best_w = -1, 0
        for t in range(xadj[v], xadj[v + 1]):
            u = adj[t]
            if match[u] < 0 and u != v and wgt[t] > best_w \
                    and vw[u] + vw[v] <= max_vwgt:
                best, best_w = u, wgt[t]
        if best >= 0:
            match[v] = best
            match[best] = v
        else:
            match[v] = v
    cmap = np.full(n, -1, dtype=np.int64)
    nc = 0
    for v in range(n):
        if cmap[v] < 0:
            cmap[v] = nc
            cmap[match[v]] = nc
            nc += 1
    return cmap, nc


def _contract(G, cmap, nc):
    e, w = G.edge_list()
    a, b = cmap[e[:, 0]], cmap[e[:, 1]]
    keep = a != b
    vw = np.bincount(cmap, weights=G.vwgt, minlength=nc).astype(np.int64)
    return SampleGraph(nc, np.stack([a[keep], b[keep]], 1), w[keep], None, vw)


# --------------------------------------------------------------------------
# bisection


def _gains(G, side):
    src = np.repeat(np.arange(G.n), np.diff(G.xadj))
    ext = np.where(side[src] != side[G.adjncy], G.adjwgt, -G.adjwgt)
    return np.bincount(src, weights=ext, minlength=G.n).astype(np.int64)


def _grow(G, target, rng, lo, hi):
    """Greedy graph growing of side 0 up to ``target`` vertex weight."""
    n = G.n
    side = np.ones(n, dtype=np.int8)
    gain = np.zeros(n, dtype=np.int64)  # weight to side 0 minus to side 1
    for v in range(n):
        gain[v] = -G.adjwgt[G.xadj[v]:G.xadj[v + 1]].sum()
    w0 = 0
    heap = []
    order = rng.permutation(n)
    pos = 0
    while w0 < target:
        while heap and side[heap[0][2]] == 0:
            heapq.heappop(heap)
        if not heap:
            # new component or first seed
            while pos < n and side[order[pos]] == 0:
                pos += 1
            if pos == n:
                break
            v = order[pos]
        else:
            g, _, v = heapq.heappop(heap)
            if -g != gain[v]:
                continue
        if w0 + G.vwgt[v] > hi and w0 >= lo:
            break
        side[v] = 0
        w0 += G.vwgt[v]
        for t in range(G.xadj[v], G.xadj[v + 1]):
            u = G.adjncy[t]
            if side[u] == 1:
                gain[u] += 2 * G.adjwgt[t]
                heapq.heappush(heap, (-gain[u], u, u))
    return side


def _fm(G, side, lo, hi, max_passes=8):
    """Boundary FM with best-prefix rollback; keeps side-0 weight in
    ``[lo, hi]`` when it starts there. Returns the refined side array."""
    side = side.copy()
    xadj, adj, wgt, vw = G.xadj, G.adjncy, G.adjwgt, G.vwgt
    w0 = int(vw[side == 0].sum())
    for _ in range(max_passes):
        gain = _gains(G, side)
        locked = np.zeros(G.n, dtype=bool)
        src = np.repeat(np.arange(G.n), np.diff(xadj))
        boundary = np.unique(src[side[src] != side[adj]])
        heap = [(-gain[v], v) for v in boundary.tolist()]
        heapq.heapify(heap)
        moves = []
        cur, best, best_len = 0, 0, 0
        while heap:
            g, v = heapq.heappop(heap)
            if locked[v] or -g != gain[v]:
                continue
            nw0 = w0 - vw[v] if side[v] == 0 else w0 + vw[v]
            if not lo <= nw0 <= hi:
                continue
            locked[v] = True
            side[v] ^= 1
            w0 = nw0
            cur -= gain[v]
            moves.append(v)
            if cur < best:
                best, best_len = cur, len(moves)
            for t in range(xadj[v], xadj[v + 1]):
                u = adj[t]
                if locked[u]:
                    continue
                gain[u] += 2 * wgt[t] if side[u] != side[v] else -2 * wgt[t]
                heapq.heappush(heap, (-gain[u], u))
            if len(moves) - best_len > max(50, G.n // 20):
                break
        for v in moves[best_len:][::-1]:
            side[v] ^= 1
            w0 += vw[v] if side[v] == 0 else -vw[v]
        if best == 0:
            break
    return side


def _rebalance(G, side, lo, hi):
    """Move best-gain vertices off the heavy side until ``lo <= w0 <= hi``.

    Always succeeds on unit vertex weights; on coarse levels it gives up
    after ``n`` moves and leaves the rest to finer levels.
    """
    side = side.copy()
    vw = G.vwgt
    w0 = int(vw[side == 0].sum())
    if lo <= w0 <= hi:
        return side
    gain = _gains(G, side)
    for _ in range(G.n):
        if lo <= w0 <= hi:
            break
        src = 0 if w0 > hi else 1
        cand = np.flatnonzero(side == src)
        if cand.size == 0:
            break
        nw = w0 - vw[cand] if src == 0 else w0 + vw[cand]
        fits = cand[(nw >= lo) & (nw <= hi)]
        if fits.size == 0:
            fits = cand[vw[cand] == vw[cand].min()]
        v = fits[np.argmax(gain[fits])]
        side[v] ^= 1
        w0 += -int(vw[v]) if src == 0 else int(vw[v])
        gain[v] = -gain[v]
        for t in range(G.xadj[v], G.xadj[v + 1]):
            u = G.adjncy[t]
            gain[u] += 2 * G.adjwgt[t] if side[u] != side[v] \
                else -2 * G.adjwgt[t]
    return side


def _cut(G, side):
    return cut_weight(G, side)


def _bisect(G, lo, hi, rng, trace, tries=4):
    """Multilevel bisection; side-0 weight within ``[lo, hi]``."""
    levels = [G]
    maps = []
    total = int(G.vwgt.sum())
    cap = max(1, (hi - lo) // 2, total // 50)
    while levels[-1].n > 200:
        H = levels[-1]
        cmap, nc = _heavy_edge_matching(H, rng, cap)
        if nc > 0.9 * H.n:
            break
        maps.append(cmap)
        levels.append(_contract(H, cmap, nc))
    C = levels[-1]
    target = (lo + hi) // 2
    best = None
    for _ in range(tries):
        side = _grow(C, target, rng, lo, hi)
        side = _rebalance(C, side, lo, hi)
        side = _fm(C, side, lo, hi)
        c = _cut(C, side)
        ok = lo <= int(C.vwgt[side == 0].sum()) <= hi
        key = (not ok, c)
        if best is None or key < best[0]:
            best = (key, side)
    side = best[1]
    trace.append((len(levels) - 1, _cut(C, side), _cut(C, side)))
    for lvl in range(len(maps) - 1, -1, -1):
        side = side[maps[lvl]]
        H = levels[lvl]
        side = _rebalance(H, side, lo, hi)
        before = _cut(H, side)
        side = _fm(H, side, lo, hi)
        trace.append((lvl, before, _cut(H, side)))
    return side


def partition(G, k, epsilon=0.05, seed=0):
    """Partition ``G`` into ``k`` parts of at most ``(1+eps)*ceil(n/k)``.

    Returns
    -------
    GraphPartition

    Raises
    ------
    InfeasibleBalance
        If the graph has fewer than ``k`` vertices.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must be in (0, 1]")
    n = G.n
    if n < k:
        raise InfeasibleBalance(f"{n} vertices cannot form {k} parts")
    labels = np.zeros(n, dtype=np.int64)
    trace = []
    if k == 1:
        return GraphPartition(labels, 1, epsilon, trace)
    U = max_part_size(n, k, epsilon)
    delta = epsilon / math.ceil(math.log2(k))
    rng = np.random.default_rng(seed)
    stack = [(np.arange(n), k, 0)]
    while stack:
        verts, kk, base = stack.pop()
        if kk == 1:
            labels[verts] = base
            continue
        k1 = kk // 2
        k2 = kk - k1
        m = verts.shape[0]
        feas_lo = max(k1, m - k2 * U)
        feas_hi = min(k1 * U, m - k2)
        ideal = m * k1 / kk
        # the integer window always contains floor/ceil of the ideal split
        lo = max(feas_lo, min(math.ceil(ideal * (1 - delta)),
                              math.floor(ideal)))
        hi = min(feas_hi, max(math.floor(ideal * (1 + delta)),
                              math.ceil(ideal)))
        H = G.subgraph(verts) if m < n else G
        side = _bisect(H, lo, hi, rng, trace)
        w0 = int((side == 0).sum())
        if not lo <= w0 <= hi:
            # unit weights at the finest level make this reachable
            side = _rebalance(H, side, lo, hi)
        stack.append((verts[side == 0], k1, base))
        stack.append((verts[side == 1], k2, base + k1))
    return GraphPartition(labels, k, epsilon, trace)
