"""Exact-decision geometric predicates and primitive constructions.

Sign conventions (D = 2 or 3):

* ``orient(v0, ..., vD)`` is the sign of ``det[v1 - v0; ...; vD - v0]``. In 2D
  this is +1 for counterclockwise triangles.
* ``in_sphere(v0, ..., vD, q)`` is +1 iff ``q`` lies strictly inside the
  circumsphere of a positively oriented simplex, 0 on it, -1 outside.

Decisions are evaluated in binary64 first and only re-evaluated with
expansion arithmetic when the magnitude of the result falls below a
forward error bound, so the returned sign is always exact.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _exact

_EPS = 2.0 ** -53
# Shewchuk's bounds, doubled for margin.
_CCW_BOUND = 2.0 * (3.0 + 16.0 * _EPS) * _EPS
_O3D_BOUND = 2.0 * (7.0 + 56.0 * _EPS) * _EPS
_ICC_BOUND = 2.0 * (10.0 + 96.0 * _EPS) * _EPS
_ISP_BOUND = 2.0 * (16.0 + 224.0 * _EPS) * _EPS

# circumspheres with |det| / prod(edge lengths) below this are treated as
# unbounded by the conservative intersection filters
_WELL_CONDITIONED = 1e-5


class DegenerateSimplex(ValueError):
    """The simplex vertices are affinely dependent."""


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius_squared: float


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


# --------------------------------------------------------------------------
# scalar kernels


@njit(cache=True, nogil=True)
def orient2(ax, ay, bx, by, cx, cy):
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    bound = _CCW_BOUND * (abs(detleft) + abs(detright))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return _exact.orient2d_exact(ax, ay, bx, by, cx, cy)


@njit(cache=True, nogil=True)
def orient3(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    adx = ax - dx
    bdx = bx - dx
    cdx = cx - dx
    ady = ay - dy
    bdy = by - dy
    cdy = cy - dy
    adz = az - dz
    bdz = bz - dz
    cdz = cz - dz
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    cdxady = cdx * ady
    adxcdy = adx * cdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    det = (adz * (bdxcdy - cdxbdy) + bdz * (cdxady - adxcdy)
           + cdz * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * abs(adz)
                 + (abs(cdxady) + abs(adxcdy)) * abs(bdz)
                 + (abs(adxbdy) + abs(bdxady)) * abs(cdz))
    bound = _O3D_BOUND * permanent
    # det[a-d; b-d; c-d] has the opposite sign of det[b-a; c-a; d-a]
    if det > bound:
        return -1
    if -det > bound:
        return 1
    return -_exact.orient3d_exact(ax, ay, az, bx, by, bz, cx, cy, cz,
                                  dx, dy, dz)


@njit(cache=True, nogil=True)
def insphere2(ax, ay, bx, by, cx, cy, qx, qy):
    adx = ax - qx
    bdx = bx - qx
    cdx = cx - qx
    ady = ay - qy
    bdy = by - qy
    cdy = cy - qy
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady
    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy
    det = (alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy)
           + clift * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * alift
                 + (abs(cdxady) + abs(adxcdy)) * blift
                 + (abs(adxbdy) + abs(bdxady)) * clift)
    bound = _ICC_BOUND * permanent
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return _exact.incircle_exact(ax, ay, bx, by, cx, cy, qx, qy)


@njit(cache=True, nogil=True)
def insphere3(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz, qx, qy, qz):
    aex = ax - qx
    bex = bx - qx
    cex = cx - qx
    dex = dx - qx
    aey = ay - qy
    bey = by - qy
    cey = cy - qy
    dey = dy - qy
    aez = az - qz
    bez = bz - qz
    cez = cz - qz
    dez = dz - qz
    aexbey = aex * bey
    bexaey = bex * aey
    ab = aexbey - bexaey
    bexcey = bex * cey
    cexbey = cex * bey
    bc = bexcey - cexbey
    cexdey = cex * dey
    dexcey = dex * cey
    cd = cexdey - dexcey
    dexaey = dex * aey
    aexdey = aex * dey
    da = dexaey - aexdey
    aexcey = aex * cey
    cexaey = cex * aey
    ac = aexcey - cexaey
    bexdey = bex * dey
    dexbey = dex * bey
    bd = bexdey - dexbey
    abc = aez * bc - bez * ac + cez * ab
    bcd = bez * cd - cez * bd + dez * bc
    cda = cez * da + dez * ac + aez * cd
    dab = dez * ab + aez * bd + bez * da
    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez
    det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd)
    aezp = abs(aez)
    bezp = abs(bez)
    cezp = abs(cez)
    dezp = abs(dez)
    aexbeyp = abs(aexbey)
    bexaeyp = abs(bexaey)
    bexceyp = abs(bexcey)
    cexbeyp = abs(cexbey)
    cexdeyp = abs(cexdey)
    dexceyp = abs(dexcey)
    dexaeyp = abs(dexaey)
    aexdeyp = abs(aexdey)
    aexceyp = abs(aexcey)
    cexaeyp = abs(cexaey)
    bexdeyp = abs(bexdey)
    dexbeyp = abs(dexbey)
    permanent = (((cexdeyp + dexceyp) * bezp + (dexbeyp + bexdeyp) * cezp
                  + (bexceyp + cexbeyp) * dezp) * alift
                 + ((dexaeyp + aexdeyp) * cezp + (aexceyp + cexaeyp) * dezp
                    + (cexdeyp + dexceyp) * aezp) * blift
                 + ((aexbeyp + bexaeyp) * dezp + (bexdeyp + dexbeyp) * aezp
                    + (dexaeyp + aexdeyp) * bezp) * clift
                 + ((bexceyp + cexbeyp) * aezp + (cexaeyp + aexceyp) * bezp
                    + (aexbeyp + bexaeyp) * cezp) * dlift)
    bound = _ISP_BOUND * permanent
    # positive lifted determinant means inside for negatively oriented
    # simplices under this module's orient convention
    if det > bound:
        return -1
    if -det > bound:
        return 1
    return -_exact.insphere_exact(ax, ay, az, bx, by, bz, cx, cy, cz,
                                  dx, dy, dz, qx, qy, qz)


# --------------------------------------------------------------------------
# index-based kernels over a point array


@njit(cache=True, nogil=True)
def orient_ids(P, a, b, c, d, dim):
    if dim == 2:
        return orient2(P[a, 0], P[a, 1], P[b, 0], P[b, 1], P[c, 0], P[c, 1])
    return orient3(P[a, 0], P[a, 1], P[a, 2], P[b, 0], P[b, 1], P[b, 2],
                   P[c, 0], P[c, 1], P[c, 2], P[d, 0], P[d, 1], P[d, 2])


@njit(cache=True, nogil=True)
def insphere_ids(P, a, b, c, d, q, dim):
    if dim == 2:
        return insphere2(P[a, 0], P[a, 1], P[b, 0], P[b, 1],
                         P[c, 0], P[c, 1], P[q, 0], P[q, 1])
    return insphere3(P[a, 0], P[a, 1], P[a, 2], P[b, 0], P[b, 1], P[b, 2],
                     P[c, 0], P[c, 1], P[c, 2], P[d, 0], P[d, 1], P[d, 2],
                     P[q, 0], P[q, 1], P[q, 2])


@njit(cache=True, nogil=True)
def orient_facet_point(P, f0, f1, f2, x, dim):
    """orient(facet..., x) for a coordinate vector ``x``."""
    if dim == 2:
        return orient2(P[f0, 0], P[f0, 1], P[f1, 0], P[f1, 1], x[0], x[1])
    return orient3(P[f0, 0], P[f0, 1], P[f0, 2], P[f1, 0], P[f1, 1],
                   P[f1, 2], P[f2, 0], P[f2, 1], P[f2, 2], x[0], x[1], x[2])


@njit(cache=True, nogil=True)
def circumsphere_ids(P, a, b, c, d, dim, center):
    """Write the binary64 circumcenter into ``center``.

    Returns ``(radius_squared, scale, well_conditioned)``; ``scale`` is the
    longest edge from vertex ``a``. Degenerate simplices return ``-1`` as
    radius.
    """
    if dim == 2:
        ax = P[b, 0] - P[a, 0]
        ay = P[b, 1] - P[a, 1]
        bx = P[c, 0] - P[a, 0]
        by = P[c, 1] - P[a, 1]
        det = ax * by - ay * bx
        la = ax * ax + ay * ay
        lb = bx * bx + by * by
        if det == 0.0:
            return -1.0, 0.0, False
        ux = (by * la - ay * lb) / (2.0 * det)
        uy = (ax * lb - bx * la) / (2.0 * det)
        center[0] = P[a, 0] + ux
        center[1] = P[a, 1] + uy
        norm = np.sqrt(la * lb)
        scale = np.sqrt(max(la, lb))
        r2 = 0.0
        for v in (a, b, c):
            dx = P[v, 0] - center[0]
            dy = P[v, 1] - center[1]
            r2 = max(r2, dx * dx + dy * dy)
        return r2, scale, abs(det) >= _WELL_CONDITIONED * norm
    ax = P[b, 0] - P[a, 0]
    ay = P[b, 1] - P[a, 1]
    az = P[b, 2] - P[a, 2]
    bx = P[c, 0] - P[a, 0]
    by = P[c, 1] - P[a, 1]
    bz = P[c, 2] - P[a, 2]
    cx = P[d, 0] - P[a, 0]
    cy = P[d, 1] - P[a, 1]
    cz = P[d, 2] - P[a, 2]
    # cross products
    bcx = by * cz - bz * cy
    bcy = bz * cx - bx * cz
    bcz = bx * cy - by * cx
    cax = cy * az - cz * ay
    cay = cz * ax - cx * az
    caz = cx * ay - cy * ax
    abx = ay * bz - az * by
    aby = az * bx - ax * bz
    abz = ax * by - ay * bx
    det = ax * bcx + ay * bcy + az * bcz
    if det == 0.0:
        return -1.0, 0.0, False
    la = ax * ax + ay * ay + az * az
    lb = bx * bx + by * by + bz * bz
    lc = cx * cx + cy * cy + cz * cz
    inv = 0.5 / det
    center[0] = P[a, 0] + (la * bcx + lb * cax + lc * abx) * inv
    center[1] = P[a, 1] + (la * bcy + lb * cay + lc * aby) * inv
    center[2] = P[a, 2] + (la * bcz + lb * caz + lc * abz) * inv
    norm = np.sqrt(la * lb * lc)
    scale = np.sqrt(max(la, max(lb, lc)))
    r2 = 0.0
    for v in (a, b, c, d):
        dx = P[v, 0] - center[0]
        dy = P[v, 1] - center[1]
        dz = P[v, 2] - center[2]
        r2 = max(r2, dx * dx + dy * dy + dz * dz)
    return r2, scale, abs(det) >= _WELL_CONDITIONED * norm


@njit(cache=True, nogil=True)
def filter_radius_squared(r2, scale):
    """Inflate a binary64 circumradius so rounding never hides an overlap."""
    r = np.sqrt(r2)
    r = r * (1.0 + 1e-9) + 1e-9 * scale
    return r * r


@njit(cache=True, nogil=True)
def box_sphere_kernel(lo, hi, center, r2):
    d = 0.0
    for i in range(center.shape[0]):
        c = center[i]
        if c < lo[i]:
            t = lo[i] - c
            d += t * t
        elif c > hi[i]:
            t = c - hi[i]
            d += t * t
    return d <= r2


@njit(cache=True, nogil=True)
def halfspace_box_kernel(P, f0, f1, f2, outward, lo, hi, dim, corner):
    """True iff some box corner lies strictly on the ``outward`` side."""
    for mask in range(1 << dim):
        for i in range(dim):
            corner[i] = hi[i] if (mask >> i) & 1 else lo[i]
        if orient_facet_point(P, f0, f1, f2, corner, dim) == outward:
            return True
    return False


@njit(cache=True, nogil=True)
def _orient_many(S):
    m = S.shape[0]
    dim = S.shape[2]
    out = np.empty(m, dtype=np.int8)
    for i in range(m):
        P = S[i]
        out[i] = orient_ids(P, 0, 1, 2, 3 if dim == 3 else 0, dim)
    return out


@njit(cache=True, nogil=True)
def _insphere_many(S, Q):
    m = S.shape[0]
    dim = S.shape[2]
    out = np.empty(m, dtype=np.int8)
    P = np.empty((dim + 2, dim))
    for i in range(m):
        P[: dim + 1] = S[i]
        P[dim + 1] = Q[i]
        if dim == 2:
            out[i] = insphere_ids(P, 0, 1, 2, 0, 3, 2)
        else:
            out[i] = insphere_ids(P, 0, 1, 2, 3, 4, 3)
    return out


# --------------------------------------------------------------------------
# public API


def _simplex_array(vertices):
    V = np.ascontiguousarray(vertices, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] not in (2, 3) or V.shape[0] != V.shape[1] + 1:
        raise ValueError("expected D+1 points of dimension D in {2, 3}")
    if not np.all(np.isfinite(V)):
        raise ValueError("coordinates must be finite")
    return V


def orient(vertices):
    """Orientation sign of D+1 points, exact."""
    V = _simplex_array(vertices)
    return int(_orient_many(V[None])[0])


def in_sphere(vertices, query):
    """+1/0/-1 for query strictly inside/on/outside the circumsphere.

    ``vertices`` must be positively oriented.
    """
    V = _simplex_array(vertices)
    q = np.ascontiguousarray(query, dtype=np.float64)
    if __debug__ and int(_orient_many(V[None])[0]) != 1:
        raise ValueError("in_sphere requires a positively oriented simplex")
    return int(_insphere_many(V[None], q[None])[0])


def orient_many(simplices):
    """Vectorized ``orient`` over an ``(m, D+1, D)`` array."""
    S = np.ascontiguousarray(simplices, dtype=np.float64)
    return _orient_many(S)


def in_sphere_many(simplices, queries):
    """Vectorized ``in_sphere`` over ``(m, D+1, D)`` and ``(m, D)`` arrays.

    No orientation check is performed.
    """
    S = np.ascontiguousarray(simplices, dtype=np.float64)
    Q = np.ascontiguousarray(queries, dtype=np.float64)
    return _insphere_many(S, Q)


def circumsphere(vertices):
    """Binary64 circumsphere of a simplex.

    Raises
    ------
    DegenerateSimplex
        If the vertices are affinely dependent.
    """
    V = _simplex_array(vertices)
    dim = V.shape[1]
    if int(_orient_many(V[None])[0]) == 0:
        raise DegenerateSimplex("vertices are affinely dependent")
    center = np.empty(dim)
    r2, _, _ = circumsphere_ids(V, 0, 1, 2, 3 if dim == 3 else 0, dim, center)
    return Sphere(center, float(r2))


def box_sphere_overlap(box, sphere):
    """Clamped squared distance from the sphere center to the box <= r^2."""
    return bool(box_sphere_kernel(box.lo, box.hi,
                                  np.asarray(sphere.center, dtype=np.float64),
                                  sphere.radius_squared))


def halfspace_box_overlap(facet, outward, box):
    """True iff a corner of ``box`` is strictly on the outer side of ``facet``.

    ``facet`` holds D points spanning a hyperplane; ``outward`` is the sign
    ``orient(*facet, q)`` takes for points ``q`` on the outer side.
    """
    F = np.ascontiguousarray(facet, dtype=np.float64)
    dim = F.shape[1]
    if F.shape[0] != dim or outward not in (-1, 1):
        raise ValueError("facet needs D points and outward must be +-1")
    corner = np.empty(dim)
    return bool(halfspace_box_kernel(F, 0, 1, 2 if dim == 3 else 0, outward,
                                     box.lo, box.hi, dim, corner))
