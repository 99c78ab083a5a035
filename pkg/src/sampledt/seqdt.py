"""Sequential Bowyer-Watson Delaunay triangulation in 2D and 3D.

The kernel works on local vertex indices ``0..n-1`` with ``n`` standing for
the infinite vertex. An infinite cell is stored with its finite vertices in
an orientation such that substituting a point ``q`` for the infinite vertex
gives ``orient > 0`` exactly when ``q`` lies strictly beyond that hull facet.
"""

import numpy as np
from numba import njit

from .geometry import insphere_ids, orient_ids
from .tristore import INFINITE, Triangulation

OK = 0
ERR_DEGENERATE = 1
ERR_DUPLICATE = 2
ERR_WALK = 3


class DegenerateInput(ValueError):
    """All input points are affinely dependent (or too few of them)."""


class DuplicatePoint(ValueError):
    """Two input points have identical coordinates."""


# --------------------------------------------------------------------------
# kernel helpers


@njit(cache=True, nogil=True)
def _xorshift(s):
    s ^= (s << np.uint64(13)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    s ^= s >> np.uint64(7)
    s ^= (s << np.uint64(17)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return s


@njit(cache=True, nogil=True)
def _inf_pos(cells, c, INF, nv):
    for t in range(nv):
        if cells[c, t] == INF:
            return t
    return -1


@njit(cache=True, nogil=True)
def _orient_sub(P, cells, c, j, p, dim):
    # orientation of cell c with the vertex at slot j replaced by p
    a = p if j == 0 else cells[c, 0]
    b = p if j == 1 else cells[c, 1]
    cc = p if j == 2 else cells[c, 2]
    d = 0
    if dim == 3:
        d = p if j == 3 else cells[c, 3]
    return orient_ids(P, a, b, cc, d, dim)


@njit(cache=True, nogil=True)
def _insphere_cell(P, cells, c, p, dim):
    d = cells[c, 3] if dim == 3 else 0
    return insphere_ids(P, cells[c, 0], cells[c, 1], cells[c, 2], d, p, dim)


@njit(cache=True, nogil=True)
def _conflict(P, cells, nbrs, c, p, dim, INF):
    nv = dim + 1
    j = _inf_pos(cells, c, INF, nv)
    if j < 0:
        return _insphere_cell(P, cells, c, p, dim) > 0
    o = _orient_sub(P, cells, c, j, p, dim)
    if o != 0:
        return o > 0
    # p on the hull facet's plane: follow the finite cell behind it
    return _insphere_cell(P, cells, nbrs[c, j], p, dim) > 0


@njit(cache=True, nogil=True)
def _walk(P, cells, nbrs, alive, start, p, dim, INF, state, hw, nlive):
    nv = dim + 1
    c = start
    prev = -1
    steps = 0
    limit = 4 * nlive + 16
    while True:
        steps += 1
        if steps > limit:
            while True:
                state = _xorshift(state)
                c = np.int64(state % np.uint64(hw))
                if alive[c]:
                    break
            prev = -1
            steps = 0
            limit *= 2
        j = _inf_pos(cells, c, INF, nv)
        if j >= 0:
            if _orient_sub(P, cells, c, j, p, dim) > 0:
                return c, state
            prev = c
            c = nbrs[c, j]
            continue
        state = _xorshift(state)
        r = np.int64(state % np.uint64(nv))
        moved = False
        for t in range(nv):
            i = (r + t) % nv
            nb = nbrs[c, i]
            if nb == prev:
                continue
            if _orient_sub(P, cells, c, i, p, dim) < 0:
                prev = c
                c = nb
                moved = True
                break
        if not moved:
            return c, state


@njit(cache=True, nogil=True)
def _grow2(a, newcap, fill):
    out = np.full((newcap, a.shape[1]), fill, dtype=a.dtype)
    out[:a.shape[0]] = a
    return out


@njit(cache=True, nogil=True)
def _grow1(a, newcap, fill):
    out = np.full(newcap, fill, dtype=a.dtype)
    out[:a.shape[0]] = a
    return out


@njit(cache=True, nogil=True)
def _link_new(cells, nbrs, new, count, common, dim, hkeys, hval, hstamp, stamp):
    """Link the mutual facets of freshly created cells sharing ``common``.

    Every facet through ``common`` other than the one opposite it is shared
    with exactly one other new cell; match them by the remaining ridge.
    """
    nv = dim + 1
    mask = hstamp.shape[0] - 1
    for t in range(count):
        c = new[t]
        pc = -1
        for u in range(nv):
            if cells[c, u] == common:
                pc = u
        for j in range(nv):
            if j == pc:
                continue
            # ridge = vertices other than slots pc and j
            r0 = -1
            r1 = -1
            for u in range(nv):
                if u != pc and u != j:
                    if r0 < 0:
                        r0 = cells[c, u]
                    else:
                        r1 = cells[c, u]
            if r1 >= 0 and r1 < r0:
                tmp = r0
                r0 = r1
                r1 = tmp
            h = (r0 * 2654435761 + r1 * 40503 + 12345) & mask
            while True:
                if hstamp[h] != stamp:
                    hstamp[h] = stamp
                    hkeys[h, 0] = r0
                    hkeys[h, 1] = r1
                    hval[h, 0] = c
                    hval[h, 1] = j
                    break
                if hkeys[h, 0] == r0 and hkeys[h, 1] == r1:
                    o = hval[h, 0]
                    nbrs[c, j] = o
                    nbrs[o, hval[h, 1]] = c
                    hkeys[h, 0] = -2  # consumed
                    hkeys[h, 1] = -2
                    break
                h = (h + 1) & mask


@njit(cache=True, nogil=True)
def _initial_simplex(P, order):
    """First D+1 affinely independent points of ``order``.

    Returns ``(chosen, chosen_at, k)``; ``k < D+1`` means the points are
    affinely dependent.
    """
    dim = P.shape[1]
    nv = dim + 1
    m = order.shape[0]
    chosen = np.full(nv, -1, dtype=np.int64)
    chosen_at = np.full(nv, -1, dtype=np.int64)
    chosen[0] = order[0]
    chosen_at[0] = 0
    k = 1
    for t in range(1, m):
        q = order[t]
        if k == 1:
            same = True
            for a in range(dim):
                if P[q, a] != P[chosen[0], a]:
                    same = False
            ok = not same
        elif k == 2:
            if dim == 2:
                ok = orient_ids(P, chosen[0], chosen[1], q, 0, 2) != 0
            else:
                # not collinear iff some coordinate projection is not
                ok = False
                Q = np.empty((3, 2))
                for ax in range(3):
                    a0 = (ax + 1) % 3
                    a1 = (ax + 2) % 3
                    Q[0, 0] = P[chosen[0], a0]
                    Q[0, 1] = P[chosen[0], a1]
                    Q[1, 0] = P[chosen[1], a0]
                    Q[1, 1] = P[chosen[1], a1]
                    Q[2, 0] = P[q, a0]
                    Q[2, 1] = P[q, a1]
                    if orient_ids(Q, 0, 1, 2, 0, 2) != 0:
                        ok = True
                        break
        else:
            ok = orient_ids(P, chosen[0], chosen[1], chosen[2], q, 3) != 0
        if ok:
            chosen[k] = q
            chosen_at[k] = t
            k += 1
            if k == nv:
                break
    return chosen, chosen_at, k


@njit(cache=True, nogil=True)
def _bw_kernel(P, order, seed, stop):
    """Insert ``order[:stop]`` into a fresh triangulation.

    Returns ``(cells, nbrs, alive, status, bad)``; ``bad`` is the offending
    point for a nonzero status.
    """
    n = P.shape[0]
    dim = P.shape[1]
    nv = dim + 1
    INF = n
    m = order.shape[0]
    empty2 = np.empty((0, nv), dtype=np.int64)
    empty1 = np.empty(0, dtype=np.bool_)

    chosen, chosen_at, k = _initial_simplex(P, order)
    if k < nv:
        return empty2, empty2, empty1, ERR_DEGENERATE, -1

    cap = 64 + (3 * m if dim == 2 else 8 * m)
    cells = np.full((cap, nv), -1, dtype=np.int64)
    nbrs = np.full((cap, nv), -1, dtype=np.int64)
    alive = np.zeros(cap, dtype=np.bool_)
    mark = np.zeros(cap, dtype=np.int64)
    free = np.empty(cap, dtype=np.int64)
    nfree = 0
    hw = 0
    nlive = 0

    for t in range(nv):
        cells[0, t] = chosen[t]
    if dim == 2:
        o0 = orient_ids(P, chosen[0], chosen[1], chosen[2], 0, 2)
    else:
        o0 = orient_ids(P, chosen[0], chosen[1], chosen[2], chosen[3], 3)
    if o0 < 0:
        cells[0, 0] = chosen[1]
        cells[0, 1] = chosen[0]
    alive[0] = True
    hw = 1
    nlive = 1
    new = np.empty(64, dtype=np.int64)
    for i in range(nv):
        c = hw
        hw += 1
        for t in range(nv):
            cells[c, t] = cells[0, t]
        cells[c, i] = INF
        # swap two finite slots so that q beyond the facet orients positively
        s0 = 1 if i == 0 else 0
        s1 = 2 if i <= 1 else 1
        tmp = cells[c, s0]
        cells[c, s0] = cells[c, s1]
        cells[c, s1] = tmp
        nbrs[c, i] = 0
        nbrs[0, i] = c
        alive[c] = True
        nlive += 1
        new[i] = c

    hsize = 64
    hkeys = np.empty((hsize, 2), dtype=np.int64)
    hval = np.empty((hsize, 2), dtype=np.int64)
    hstamp = np.zeros(hsize, dtype=np.int64)
    hst = 1
    _link_new(cells, nbrs, new, nv, INF, dim, hkeys, hval, hstamp, hst)

    # ---- hint grid over the bounding box
    lo = np.empty(dim)
    hi = np.empty(dim)
    for a in range(dim):
        lo[a] = np.inf
        hi[a] = -np.inf
    for t in range(m):
        q = order[t]
        for a in range(dim):
            lo[a] = min(lo[a], P[q, a])
            hi[a] = max(hi[a], P[q, a])
    g = max(1, int((m / 4.0) ** (1.0 / dim)))
    inv_w = np.empty(dim)
    for a in range(dim):
        span = hi[a] - lo[a]
        inv_w[a] = g / span if span > 0 else 0.0
    hint = np.full(g ** dim, -1, dtype=np.int64)

    state = np.uint64(seed) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(1)
    if state == 0:
        state = np.uint64(1)

    stack = np.empty(64, dtype=np.int64)
    cav = np.empty(64, dtype=np.int64)
    bcell = np.empty(64, dtype=np.int64)
    bpos = np.empty(64, dtype=np.int64)
    bverts = np.empty((64, nv), dtype=np.int64)
    bout = np.empty(64, dtype=np.int64)
    boutpos = np.empty(64, dtype=np.int64)
    stampv = 0
    last = 0

    for t in range(m if stop < 0 else min(stop, m)):
        skip = False
        for u in range(nv):
            if chosen_at[u] == t:
                skip = True
        if skip:
            continue
        p = order[t]
        b = 0
        for a in range(dim):
            kk = int((P[p, a] - lo[a]) * inv_w[a])
            kk = min(max(kk, 0), g - 1)
            b = b * g + kk
        start = hint[b]
        if start < 0 or not alive[start]:
            start = last
        if not alive[start]:
            start = 0
            while not alive[start]:
                start += 1
        c0, state = _walk(P, cells, nbrs, alive, start, p, dim, INF, state,
                          hw, nlive)
        if not _conflict(P, cells, nbrs, c0, p, dim, INF):
            return cells[:hw], nbrs[:hw], alive[:hw], ERR_DUPLICATE, p

        # ---- cavity by BFS; mark +stamp inside, -stamp tested outside
        stampv += 1
        ncav = 0
        nb_ = 0
        sp = 0
        stack[sp] = c0
        sp += 1
        mark[c0] = stampv
        while sp > 0:
            sp -= 1
            c = stack[sp]
            if ncav >= cav.shape[0]:
                cav = _grow1(cav, 2 * cav.shape[0], 0)
            cav[ncav] = c
            ncav += 1
            for i in range(nv):
                o = nbrs[c, i]
                if mark[o] == stampv:
                    continue
                if mark[o] != -stampv and _conflict(P, cells, nbrs, o, p,
                                                    dim, INF):
                    mark[o] = stampv
                    if sp >= stack.shape[0]:
                        stack = _grow1(stack, 2 * stack.shape[0], 0)
                    stack[sp] = o
                    sp += 1
                else:
                    mark[o] = -stampv
                    if nb_ >= bcell.shape[0]:
                        nn = 2 * bcell.shape[0]
                        bcell = _grow1(bcell, nn, 0)
                        bpos = _grow1(bpos, nn, 0)
                        bout = _grow1(bout, nn, 0)
                        boutpos = _grow1(boutpos, nn, 0)
                        bverts = _grow2(bverts, nn, 0)
                    bcell[nb_] = c
                    bpos[nb_] = i
                    nb_ += 1

        # snapshot boundary facets before any cavity slot is reused
        for q in range(nb_):
            c = bcell[q]
            i = bpos[q]
            o = nbrs[c, i]
            for u in range(nv):
                bverts[q, u] = cells[c, u]
                if nbrs[o, u] == c:
                    boutpos[q] = u
            bverts[q, i] = p
            bout[q] = o

        # ---- free cavity cells, allocate the new star
        for q in range(ncav):
            c = cav[q]
            alive[c] = False
            if nfree >= free.shape[0]:
                free = _grow1(free, 2 * free.shape[0], 0)
            free[nfree] = c
            nfree += 1
        nlive -= ncav
        need = nb_ - nfree
        if need > 0 and hw + need > cells.shape[0]:
            nc = max(2 * cells.shape[0], hw + need + 64)
            cells = _grow2(cells, nc, -1)
            nbrs = _grow2(nbrs, nc, -1)
            alive = _grow1(alive, nc, False)
            mark = _grow1(mark, nc, 0)
        if nb_ > new.shape[0]:
            new = np.empty(2 * nb_, dtype=np.int64)
        for q in range(nb_):
            if nfree > 0:
                nfree -= 1
                c = free[nfree]
            else:
                c = hw
                hw += 1
            mark[c] = 0
            for u in range(nv):
                cells[c, u] = bverts[q, u]
                nbrs[c, u] = -1
            nbrs[c, bpos[q]] = bout[q]
            nbrs[bout[q], boutpos[q]] = c
            alive[c] = True
            new[q] = c
        nlive += nb_

        need_h = 4 * nb_ * dim
        if need_h > hsize:
            while hsize < need_h:
                hsize *= 2
            hkeys = np.empty((hsize, 2), dtype=np.int64)
            hval = np.empty((hsize, 2), dtype=np.int64)
            hstamp = np.zeros(hsize, dtype=np.int64)
        hst += 1
        _link_new(cells, nbrs, new, nb_, p, dim, hkeys, hval, hstamp, hst)

        last = new[0]
        hint[b] = last

    return cells[:hw], nbrs[:hw], alive[:hw], OK, -1


# --------------------------------------------------------------------------
# public API


def _to_triangulation(points, ids, cells, nbrs, alive):
    live = np.flatnonzero(alive)
    remap = np.full(cells.shape[0], -1, dtype=np.int64)
    remap[live] = np.arange(live.shape[0])
    cells = cells[live]
    nb = remap[nbrs[live]]
    lookup = np.append(ids, INFINITE)
    glob = lookup[cells]
    order = np.argsort(glob, axis=1, kind="stable")
    simplices = np.take_along_axis(glob, order, axis=1)
    neighbors = np.take_along_axis(nb, order, axis=1)
    return Triangulation(points, simplices, neighbors)


def affinely_independent(points, ids=None):
    """True if the selected points span the full dimension."""
    points = np.asarray(points, dtype=np.float64)
    if ids is None:
        ids = np.arange(points.shape[0], dtype=np.int64)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if ids.shape[0] < points.shape[1] + 1:
        return False
    _, _, k = _initial_simplex(points, ids)
    return k == points.shape[1] + 1


def triangulate_seq(points, ids=None, seed=0, shuffle=True, stop=None):
    """Delaunay triangulation by randomized incremental insertion.

    Parameters
    ----------
    points : (N, D) float array
        Global coordinates; the result refers to their row ids.
    ids : int array, optional
        Subset of rows to triangulate (default: all).
    seed : int
        Seed of the insertion-order shuffle and the walk.
    shuffle : bool
        If False, insert in the given order.
    stop : int, optional
        Insert only the first ``stop`` points of the insertion order.

    Returns
    -------
    Triangulation

    Raises
    ------
    DegenerateInput
        Fewer than D+1 points or all points affinely dependent.
    DuplicatePoint
        Two points share identical coordinates.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] not in (2, 3):
        raise ValueError("points must be an (N, 2) or (N, 3) array")
    if ids is None:
        ids = np.arange(points.shape[0], dtype=np.int64)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    dim = points.shape[1]
    n = ids.shape[0]
    if n < dim + 1:
        raise DegenerateInput(f"need at least {dim + 1} points, got {n}")
    local = np.ascontiguousarray(points[ids])
    if not np.all(np.isfinite(local)):
        raise ValueError("coordinates must be finite")
    if shuffle:
        order = np.random.default_rng(seed).permutation(n).astype(np.int64)
    else:
        order = np.arange(n, dtype=np.int64)
    cells, nbrs, alive, status, bad = _bw_kernel(
        local, order, seed & 0x7FFFFFFFFFFFFFFF, -1 if stop is None else stop)
    if status == ERR_DEGENERATE:
        raise DegenerateInput("all points are affinely dependent")
    if status == ERR_DUPLICATE:
        raise DuplicatePoint(f"point {int(ids[bad])} duplicates an earlier point")
    if status != OK:
        raise RuntimeError("point location failed")
    return _to_triangulation(points, ids, cells, nbrs, alive)
