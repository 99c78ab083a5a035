"""Floating-point expansion arithmetic and exact determinant signs.

An expansion is a 1D float64 array of non-overlapping components sorted by
increasing magnitude whose exact sum is the represented value. All routines
eliminate zero components but always return at least one entry.
"""

import numpy as np
from numba import njit

_SPLITTER = 134217729.0  # 2**27 + 1


@njit(cache=True, nogil=True)
def fast_two_sum(a, b):
    x = a + b
    return x, b - (x - a)


@njit(cache=True, nogil=True)
def two_sum(a, b):
    x = a + b
    bv = x - a
    av = x - bv
    return x, (a - av) + (b - bv)


@njit(cache=True, nogil=True)
def two_diff(a, b):
    x = a - b
    bv = a - x
    av = x + bv
    return x, (a - av) + (bv - b)


@njit(cache=True, nogil=True)
def split(a):
    c = _SPLITTER * a
    abig = c - a
    ahi = c - abig
    return ahi, a - ahi


@njit(cache=True, nogil=True)
def two_product(a, b):
    x = a * b
    ahi, alo = split(a)
    bhi, blo = split(b)
    err1 = x - ahi * bhi
    err2 = err1 - alo * bhi
    err3 = err2 - ahi * blo
    return x, alo * blo - err3


@njit(cache=True, nogil=True)
def diff(a, b):
    """Exact a - b as an expansion."""
    x, y = two_diff(a, b)
    if y == 0.0:
        out = np.empty(1)
        out[0] = x
        return out
    out = np.empty(2)
    out[0] = y
    out[1] = x
    return out


@njit(cache=True, nogil=True)
def expansion_sum(e, f):
    # fast_expansion_sum_zeroelim, Shewchuk 1997
    elen = e.shape[0]
    flen = f.shape[0]
    h = np.empty(elen + flen)
    ei = 0
    fi = 0
    enow = e[0]
    fnow = f[0]
    if (fnow > enow) == (fnow > -enow):
        q = enow
        ei += 1
        if ei < elen:
            enow = e[ei]
    else:
        q = fnow
        fi += 1
        if fi < flen:
            fnow = f[fi]
    hi = 0
    if ei < elen and fi < flen:
        if (fnow > enow) == (fnow > -enow):
            q, hh = fast_two_sum(enow, q)
            ei += 1
            if ei < elen:
                enow = e[ei]
        else:
            q, hh = fast_two_sum(fnow, q)
            fi += 1
            if fi < flen:
                fnow = f[fi]
        if hh != 0.0:
            h[hi] = hh
            hi += 1
        while ei < elen and fi < flen:
            if (fnow > enow) == (fnow > -enow):
                q, hh = two_sum(q, enow)
                ei += 1
                if ei < elen:
                    enow = e[ei]
            else:
                q, hh = two_sum(q, fnow)
                fi += 1
                if fi < flen:
                    fnow = f[fi]
            if hh != 0.0:
                h[hi] = hh
                hi += 1
    while ei < elen:
        q, hh = two_sum(q, enow)
        ei += 1
        if ei < elen:
            enow = e[ei]
        if hh != 0.0:
            h[hi] = hh
            hi += 1
    while fi < flen:
        q, hh = two_sum(q, fnow)
        fi += 1
        if fi < flen:
            fnow = f[fi]
        if hh != 0.0:
            h[hi] = hh
            hi += 1
    if q != 0.0 or hi == 0:
        h[hi] = q
        hi += 1
    return h[:hi]


@njit(cache=True, nogil=True)
def scale_expansion(e, b):
    # scale_expansion_zeroelim, Shewchuk 1997
    elen = e.shape[0]
    h = np.empty(2 * elen)
    bhi, blo = split(b)
    q = e[0] * b
    ahi, alo = split(e[0])
    err1 = q - ahi * bhi
    err2 = err1 - alo * bhi
    err3 = err2 - ahi * blo
    hh = alo * blo - err3
    hi = 0
    if hh != 0.0:
        h[hi] = hh
        hi += 1
    for i in range(1, elen):
        enow = e[i]
        p1 = enow * b
        ahi, alo = split(enow)
        err1 = p1 - ahi * bhi
        err2 = err1 - alo * bhi
        err3 = err2 - ahi * blo
        p0 = alo * blo - err3
        s, hh = two_sum(q, p0)
        if hh != 0.0:
            h[hi] = hh
            hi += 1
        q, hh = fast_two_sum(p1, s)
        if hh != 0.0:
            h[hi] = hh
            hi += 1
    if q != 0.0 or hi == 0:
        h[hi] = q
        hi += 1
    return h[:hi]


@njit(cache=True, nogil=True)
def product(e, f):
    out = scale_expansion(e, f[0])
    for j in range(1, f.shape[0]):
        out = expansion_sum(out, scale_expansion(e, f[j]))
    return out


@njit(cache=True, nogil=True)
def negate(e):
    return -e


@njit(cache=True, nogil=True)
def sign(e):
    v = e[e.shape[0] - 1]
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


@njit(cache=True, nogil=True)
def _minor2(a, b, c, d):
    # a*d - b*c
    return expansion_sum(product(a, d), negate(product(b, c)))


@njit(cache=True, nogil=True)
def orient2d_exact(ax, ay, bx, by, cx, cy):
    """Sign of det[a-c; b-c]."""
    acx = diff(ax, cx)
    acy = diff(ay, cy)
    bcx = diff(bx, cx)
    bcy = diff(by, cy)
    return sign(_minor2(acx, acy, bcx, bcy))


@njit(cache=True, nogil=True)
def _det3(a0, a1, a2, b0, b1, b2, c0, c1, c2):
    # rows a, b, c; cofactor expansion along column 2
    m_ab = _minor2(a0, a1, b0, b1)
    m_ac = _minor2(a0, a1, c0, c1)
    m_bc = _minor2(b0, b1, c0, c1)
    t = product(a2, m_bc)
    t = expansion_sum(t, negate(product(b2, m_ac)))
    t = expansion_sum(t, product(c2, m_ab))
    return t


@njit(cache=True, nogil=True)
def orient3d_exact(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    """Sign of det[a-d; b-d; c-d]."""
    return sign(_det3(diff(ax, dx), diff(ay, dy), diff(az, dz),
                      diff(bx, dx), diff(by, dy), diff(bz, dz),
                      diff(cx, dx), diff(cy, dy), diff(cz, dz)))


@njit(cache=True, nogil=True)
def _lift2(x, y):
    return expansion_sum(product(x, x), product(y, y))


@njit(cache=True, nogil=True)
def incircle_exact(ax, ay, bx, by, cx, cy, dx, dy):
    """Sign of det[[a-d, |a-d|^2]; [b-d, ..]; [c-d, ..]]."""
    adx = diff(ax, dx)
    ady = diff(ay, dy)
    bdx = diff(bx, dx)
    bdy = diff(by, dy)
    cdx = diff(cx, dx)
    cdy = diff(cy, dy)
    return sign(_det3(adx, ady, _lift2(adx, ady),
                      bdx, bdy, _lift2(bdx, bdy),
                      cdx, cdy, _lift2(cdx, cdy)))


@njit(cache=True, nogil=True)
def insphere_exact(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz,
                   ex, ey, ez):
    """Sign of the 4x4 lifted determinant with rows (v - e, |v - e|^2)."""
    aex = diff(ax, ex)
    aey = diff(ay, ey)
    aez = diff(az, ez)
    bex = diff(bx, ex)
    bey = diff(by, ey)
    bez = diff(bz, ez)
    cex = diff(cx, ex)
    cey = diff(cy, ey)
    cez = diff(cz, ez)
    dex = diff(dx, ex)
    dey = diff(dy, ey)
    dez = diff(dz, ez)
    alift = expansion_sum(_lift2(aex, aey), product(aez, aez))
    blift = expansion_sum(_lift2(bex, bey), product(bez, bez))
    clift = expansion_sum(_lift2(cex, cey), product(cez, cez))
    dlift = expansion_sum(_lift2(dex, dey), product(dez, dez))
    abc = _det3(aex, aey, aez, bex, bey, bez, cex, cey, cez)
    bcd = _det3(bex, bey, bez, cex, cey, cez, dex, dey, dez)
    cda = _det3(aex, aey, aez, cex, cey, cez, dex, dey, dez)
    dab = _det3(aex, aey, aez, bex, bey, bez, dex, dey, dez)
    t = product(dlift, abc)
    t = expansion_sum(t, negate(product(clift, dab)))
    t = expansion_sum(t, product(blift, cda))
    t = expansion_sum(t, negate(product(alift, bcd)))
    return sign(t)
