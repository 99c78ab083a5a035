"""Partition-intersection tests: bounding box, uniform grid with an AABB
tree over occupied cells, and exact in-sphere tests on candidate cells.

An index is stored as flat arrays so several of them can be packed into one
structure and queried from compiled kernels. Node 0 of a single index is the
root; leaves carry a cell number, internal nodes carry ``-1``.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import (Box, box_sphere_kernel, circumsphere_ids,
                       filter_radius_squared, halfspace_box_kernel,
                       insphere_ids, orient_facet_point, orient_ids)

BBOX, GRID, EXACT = 0, 1, 2


@dataclass(frozen=True)
class IntersectionPolicy:
    kind: str = "grid"
    c_G: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bbox", "grid", "exact"):
            raise ValueError(f"unknown policy {self.kind!r}")
        if not self.c_G > 0:
            raise ValueError("c_G must be positive")

    @classmethod
    def parse(cls, text):
        text = str(text).strip()
        if text == "bbox":
            return cls("bbox")
        kind, _, c = text.partition("=")
        return cls(kind, float(c) if c else 1.0)

    @property
    def mode(self):
        return {"bbox": BBOX, "grid": GRID, "exact": EXACT}[self.kind]

    def __str__(self):
        return "bbox" if self.kind == "bbox" else f"{self.kind}={self.c_G:g}"


class GridIndex:
    """Occupied cells of a uniform grid over one partition plus AABB tree.

    Attributes
    ----------
    cell_edge_length : float
    cells : (c, D) int64 integer cell coordinates (in tree leaf order)
    cell_ptr, cell_pts : CSR lists of point ids per cell
    node_lo, node_hi : (2c-1, D) node boxes
    node_left, node_right, node_cell : (2c-1,) tree links / leaf cell
    root_box : Box
    """

    def __init__(self, points, ids, edge, cells, cell_ptr, cell_pts,
                 node_lo, node_hi, node_left, node_right, node_cell):
        self.points = points
        self.ids = ids
        self.cell_edge_length = edge
        self.cells = cells
        self.cell_ptr = cell_ptr
        self.cell_pts = cell_pts
        self.node_lo = node_lo
        self.node_hi = node_hi
        self.node_left = node_left
        self.node_right = node_right
        self.node_cell = node_cell

    @property
    def root_box(self):
        return Box(self.node_lo[0].copy(), self.node_hi[0].copy())

    @property
    def n_cells(self):
        return self.cells.shape[0]

    def leaf_boxes(self):
        leaf = self.node_cell >= 0
        return self.node_lo[leaf], self.node_hi[leaf], self.node_cell[leaf]

    def height(self):
        depth = np.zeros(self.node_cell.shape[0], dtype=np.int64)
        for v in range(self.node_cell.shape[0]):
            for c in (self.node_left[v], self.node_right[v]):
                if c >= 0:
                    depth[c] = depth[v] + 1
        return int(depth.max()) + 1


def point_spacing(points, ids=None):
    """Expected point spacing ``(bbox volume / n)^(1/D)``.

    Flat point sets fall back to ``longest extent / n^(1/D)``.
    """
    X = points if ids is None else points[ids]
    n, dim = X.shape
    ext = X.max(axis=0) - X.min(axis=0)
    vol = float(np.prod(ext))
    if vol > 0:
        return (vol / n) ** (1.0 / dim)
    top = float(ext.max())
    return top / n ** (1.0 / dim) if top > 0 else 1.0


@njit(cache=True)
def _build_tree(centers, lo_c, hi_c):
    """Median-split tree over leaf boxes; returns the leaf order and nodes."""
    c, dim = centers.shape
    nn = 2 * c - 1
    node_lo = np.empty((nn, dim))
    node_hi = np.empty((nn, dim))
    left = np.full(nn, -1, dtype=np.int64)
    right = np.full(nn, -1, dtype=np.int64)
    cell = np.full(nn, -1, dtype=np.int64)
    perm = np.arange(c)
    start = np.empty(nn, dtype=np.int64)
    stop = np.empty(nn, dtype=np.int64)
    start[0] = 0
    stop[0] = c
    nxt = 1
    stack = np.empty(nn, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        v = stack[sp]
        a = start[v]
        b = stop[v]
        for d in range(dim):
            node_lo[v, d] = np.inf
            node_hi[v, d] = -np.inf
        for t in range(a, b):
            q = perm[t]
            for d in range(dim):
                node_lo[v, d] = min(node_lo[v, d], lo_c[q, d])
                node_hi[v, d] = max(node_hi[v, d], hi_c[q, d])
        if b - a == 1:
            cell[v] = perm[a]
            continue
        axis = 0
        for d in range(1, dim):
            if node_hi[v, d] - node_lo[v, d] > node_hi[v, axis] - node_lo[v, axis]:
                axis = d
        seg = perm[a:b].copy()
        key = centers[seg, axis]
        order = np.argsort(key, kind="mergesort")
        perm[a:b] = seg[order]
        mid = a + (b - a) // 2
        l = nxt
        r = nxt + 1
        nxt += 2
        left[v] = l
        right[v] = r
        start[l] = a
        stop[l] = mid
        start[r] = mid
        stop[r] = b
        stack[sp] = l
        sp += 1
        stack[sp] = r
        sp += 1
    return node_lo, node_hi, left, right, cell


def build_grid_index(points, ids, c_G=1.0, spacing=None):
    """Grid index of the points ``ids``.

    The cell edge is ``c_G * spacing`` where ``spacing`` defaults to
    :func:`point_spacing` of all ``points``. Leaf boxes are grid cells
    clipped to the partition's bounding box, so the root box is exactly that
    bounding box.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape[0] == 0:
        raise ValueError("partition is empty")
    if spacing is None:
        spacing = point_spacing(points)
    edge = float(c_G) * float(spacing)
    X = points[ids]
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    key = np.floor((X - lo) / edge).astype(np.int64)
    cells, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(inv, kind="stable")
    cell_pts = ids[order]
    cell_ptr = np.zeros(cells.shape[0] + 1, dtype=np.int64)
    np.add.at(cell_ptr, inv + 1, 1)
    np.cumsum(cell_ptr, out=cell_ptr)
    lo_c = np.maximum(lo + cells * edge, lo)
    hi_c = np.minimum(lo + (cells + 1) * edge, hi)
    # the point of a cell must lie in its box even after rounding
    for d in range(X.shape[1]):
        np.minimum.at(lo_c[:, d], inv, X[:, d])
        np.maximum.at(hi_c[:, d], inv, X[:, d])
    centers = 0.5 * (lo_c + hi_c)
    node_lo, node_hi, left, right, cell = _build_tree(centers, lo_c, hi_c)
    return GridIndex(points, ids, edge, cells, cell_ptr, cell_pts, node_lo,
                     node_hi, left, right, cell)


# --------------------------------------------------------------------------
# kernels; `root` selects an index inside packed arrays


@njit(cache=True, nogil=True)
def _sphere_hits_grid(root, node_lo, node_hi, left, right, center, r2):
    stack = np.empty(128, dtype=np.int64)
    sp = 0
    stack[sp] = root
    sp += 1
    while sp > 0:
        sp -= 1
        v = stack[sp]
        if not box_sphere_kernel(node_lo[v], node_hi[v], center, r2):
            continue
        if left[v] < 0:
            return True
        stack[sp] = left[v]
        stack[sp + 1] = right[v]
        sp += 2
    return False


@njit(cache=True, nogil=True)
def _sphere_hits_exact(P, root, node_lo, node_hi, left, right, cell,
                       cell_ptr, cell_pts, center, r2, a, b, c, d, dim):
    stack = np.empty(128, dtype=np.int64)
    sp = 0
    stack[sp] = root
    sp += 1
    while sp > 0:
        sp -= 1
        v = stack[sp]
        if not box_sphere_kernel(node_lo[v], node_hi[v], center, r2):
            continue
        if left[v] < 0:
            cc = cell[v]
            for t in range(cell_ptr[cc], cell_ptr[cc + 1]):
                if insphere_ids(P, a, b, c, d, cell_pts[t], dim) > 0:
                    return True
            continue
        stack[sp] = left[v]
        stack[sp + 1] = right[v]
        sp += 2
    return False


@njit(cache=True, nogil=True)
def _all_points_insphere(P, pts, a, b, c, d, dim):
    for q in pts:
        if insphere_ids(P, a, b, c, d, q, dim) > 0:
            return True
    return False


@njit(cache=True, nogil=True)
def _halfspace_hits(P, root, node_lo, node_hi, left, right, cell, cell_ptr,
                    cell_pts, f0, f1, f2, outward, dim, exact, corner):
    stack = np.empty(128, dtype=np.int64)
    sp = 0
    stack[sp] = root
    sp += 1
    while sp > 0:
        sp -= 1
        v = stack[sp]
        if not halfspace_box_kernel(P, f0, f1, f2, outward, node_lo[v],
                                    node_hi[v], dim, corner):
            continue
        if left[v] < 0:
            if not exact:
                return True
            cc = cell[v]
            for t in range(cell_ptr[cc], cell_ptr[cc + 1]):
                q = cell_pts[t]
                if orient_facet_point(P, f0, f1, f2, P[q], dim) == outward:
                    return True
            continue
        stack[sp] = left[v]
        stack[sp + 1] = right[v]
        sp += 2
    return False


# --------------------------------------------------------------------------
# public single-index queries


def intersects_bbox(sphere, index):
    """Inflated sphere against the partition's bounding box."""
    center = np.asarray(sphere.center, dtype=np.float64)
    return bool(box_sphere_kernel(index.node_lo[0], index.node_hi[0], center,
                                  sphere.radius_squared))


def intersects_grid(sphere, index):
    """True iff some occupied leaf box overlaps the sphere."""
    center = np.asarray(sphere.center, dtype=np.float64)
    return bool(_sphere_hits_grid(0, index.node_lo, index.node_hi,
                                  index.node_left, index.node_right, center,
                                  sphere.radius_squared))


def intersects_grid_linear(sphere, index):
    """Reference linear scan over all leaf boxes."""
    lo, hi, _ = index.leaf_boxes()
    center = np.asarray(sphere.center, dtype=np.float64)
    return any(box_sphere_kernel(lo[i], hi[i], center, sphere.radius_squared)
               for i in range(lo.shape[0]))


def _simplex_frame(simplex_vertices, index):
    """Coordinates of the simplex followed by the index's points."""
    V = np.ascontiguousarray(simplex_vertices, dtype=np.float64)
    dim = V.shape[1]
    if V.shape[0] != dim + 1:
        raise ValueError("expected D+1 vertices")
    o = orient_ids(V, 0, 1, 2, 3 if dim == 3 else 0, dim)
    if o == 0:
        from .geometry import DegenerateSimplex
        raise DegenerateSimplex("vertices are affinely dependent")
    if o < 0:
        V = V[[1, 0] + list(range(2, dim + 1))]
    return V, dim


def intersects_exact(simplex_vertices, index):
    """True iff a point of the partition lies strictly inside the simplex's
    circumsphere; candidates come from the grid descent."""
    V, dim = _simplex_frame(simplex_vertices, index)
    nv = dim + 1
    # local frame: rows 0..D are the simplex, then the partition's points
    Q = np.concatenate([V, index.points[index.cell_pts]])
    pts = np.arange(nv, Q.shape[0], dtype=np.int64)
    d = 3 if dim == 3 else 0
    center = np.empty(dim)
    r2, scale, good = circumsphere_ids(Q, 0, 1, 2, d, dim, center)
    if not good or r2 < 0:
        return bool(_all_points_insphere(Q, pts, 0, 1, 2, d, dim))
    return bool(_sphere_hits_exact(
        Q, 0, index.node_lo, index.node_hi, index.node_left,
        index.node_right, index.node_cell, index.cell_ptr, pts, center,
        filter_radius_squared(r2, scale), 0, 1, 2, d, dim))


def intersects_exact_linear(simplex_vertices, index):
    """Reference full scan of ``in_sphere`` over every partition point."""
    V, dim = _simplex_frame(simplex_vertices, index)
    Q = np.concatenate([V, index.points[index.ids]])
    pts = np.arange(dim + 1, Q.shape[0], dtype=np.int64)
    return bool(_all_points_insphere(Q, pts, 0, 1, 2, 3 if dim == 3 else 0,
                                     dim))


def sphere_for_filter(sphere, scale):
    """Sphere inflated for conservative filtering."""
    from .geometry import Sphere
    return Sphere(sphere.center, float(filter_radius_squared(
        sphere.radius_squared, scale)))


# --------------------------------------------------------------------------
# packing for the border search


class PackedIndices:
    """Several grid indices concatenated into shared flat arrays."""

    def __init__(self, indices):
        self.k = len(indices)
        node_off = np.cumsum([0] + [ix.node_cell.shape[0] for ix in indices])
        cell_off = np.cumsum([0] + [ix.n_cells for ix in indices])
        pt_off = np.cumsum([0] + [ix.cell_pts.shape[0] for ix in indices])
        self.roots = node_off[:-1].astype(np.int64)
        self.node_lo = np.concatenate([ix.node_lo for ix in indices])
        self.node_hi = np.concatenate([ix.node_hi for ix in indices])
        shift = lambda a, off: np.where(a >= 0, a + off, -1)
        self.left = np.concatenate([shift(ix.node_left, node_off[j])
                                    for j, ix in enumerate(indices)])
        self.right = np.concatenate([shift(ix.node_right, node_off[j])
                                     for j, ix in enumerate(indices)])
        self.cell = np.concatenate([shift(ix.node_cell, cell_off[j])
                                    for j, ix in enumerate(indices)])
        self.cell_ptr = np.concatenate(
            [ix.cell_ptr[:-1] + pt_off[j] for j, ix in enumerate(indices)]
            + [np.array([pt_off[-1]])]).astype(np.int64)
        self.cell_pts = np.concatenate([ix.cell_pts for ix in indices])
        self.all_pts = [ix.ids for ix in indices]
