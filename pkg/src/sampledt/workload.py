"""Synthetic point distributions in the unit cube and point-file I/O."""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("uniform", "normal", "ellipsoid", "lines", "bubbles", "malicious")

DEFAULTS = {
    "normal": {"sigma": 0.15},
    "ellipsoid": {"axes3": (0.5, 0.35, 0.2), "axes2": (0.5, 0.3)},
    "lines": {"m": 10, "jitter": 1e-4},
    "bubbles": {"m": 16, "sigma": 0.03},
    "malicious": {"offset": 0.02, "sigma": 0.03},
}

_MAGIC = b"PTS1"
_BELOW_ONE = np.nextafter(1.0, 0.0)


class FormatError(ValueError):
    pass


@dataclass
class DistributionSpec:
    kind: str
    n: int
    dim: int = 3
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        for k, v in self.params.items():
            if np.any(np.asarray(v, dtype=float) <= 0):
                raise ValueError(f"parameter {k} must be positive")

    def param(self, name):
        return self.params.get(name, DEFAULTS[self.kind][name])


# --------------------------------------------------------------------------
# generators; each draws `count` points and returns (points, component ids)


def _inside(X):
    return np.all((X >= 0.0) & (X < 1.0), axis=1)


def _gaussian_around(rng, centers, which, sigma):
    dim = centers.shape[1]
    X = centers[which] + rng.normal(0.0, sigma, (which.shape[0], dim))
    bad = ~_inside(X)
    while bad.any():
        X[bad] = centers[which[bad]] + rng.normal(0.0, sigma,
                                                   (bad.sum(), dim))
        bad = ~_inside(X)
    return X


def _uniform(rng, spec, count, state):
    return rng.random((count, spec.dim)), np.zeros(count, dtype=np.int64)


def _normal(rng, spec, count, state):
    center = np.full((1, spec.dim), 0.5)
    X = _gaussian_around(rng, center, np.zeros(count, dtype=np.int64),
                         spec.param("sigma"))
    return X, np.zeros(count, dtype=np.int64)


def _ellipsoid(rng, spec, count, state):
    a = np.asarray(spec.param("axes3" if spec.dim == 3 else "axes2"),
                   dtype=float)
    a = a[:spec.dim]
    # area element of x = a*u relative to the sphere, for rejection
    cof = np.prod(a) / a
    gmax = cof.max()
    out = np.empty((0, spec.dim))
    while out.shape[0] < count:
        need = count - out.shape[0]
        u = rng.normal(size=(2 * need + 8, spec.dim))
        u /= np.linalg.norm(u, axis=1)[:, None]
        g = np.sqrt(((u * cof) ** 2).sum(axis=1))
        keep = rng.random(u.shape[0]) * gmax < g
        X = 0.5 + u[keep] * a
        X = X[_inside(X)]
        out = np.concatenate([out, X[:need]])
    return out, np.zeros(count, dtype=np.int64)


def _lines(rng, spec, count, state):
    if "segments" not in state:
        m = int(spec.param("m"))
        state["segments"] = rng.random((m, 2, spec.dim))
    seg = state["segments"]
    which = rng.integers(0, seg.shape[0], count)
    t = rng.random(count)[:, None]
    X = seg[which, 0] + t * (seg[which, 1] - seg[which, 0])
    X += rng.normal(0.0, spec.param("jitter"), X.shape)
    return np.clip(X, 0.0, _BELOW_ONE), which


def _bubbles(rng, spec, count, state):
    if "centers" not in state:
        m = int(spec.param("m"))
        state["centers"] = 0.1 + 0.8 * rng.random((m, spec.dim))
    centers = state["centers"]
    which = rng.integers(0, centers.shape[0], count)
    return _gaussian_around(rng, centers, which, spec.param("sigma")), which


def _malicious(rng, spec, count, state):
    if "centers" not in state:
        off = spec.param("offset")
        corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * spec.dim,
                                       indexing="ij")).reshape(spec.dim, -1).T
        state["centers"] = 0.5 + off * corners
    centers = state["centers"]
    which = rng.integers(0, centers.shape[0], count)
    return _gaussian_around(rng, centers, which, spec.param("sigma")), which


_GENERATORS = {
    "uniform": _uniform,
    "normal": _normal,
    "ellipsoid": _ellipsoid,
    "lines": _lines,
    "bubbles": _bubbles,
    "malicious": _malicious,
}


def _duplicate_rows(X):
    _, first = np.unique(X, axis=0, return_index=True)
    dup = np.ones(X.shape[0], dtype=bool)
    dup[first] = False
    return np.flatnonzero(dup)


def generate(spec, return_labels=False):
    """Draw ``spec.n`` distinct points of the requested distribution.

    Returns
    -------
    points : (n, D) float64 array
    labels : (n,) int array, only with ``return_labels``
        Generating component (bubble center or line segment) per point.
    state : dict, only with ``return_labels``
        Drawn ``centers`` or ``segments``.
    """
    rng = np.random.default_rng(spec.seed)
    gen = _GENERATORS[spec.kind]
    state = {}
    X, lab = gen(rng, spec, spec.n, state)
    dup = _duplicate_rows(X)
    while dup.size:
        Y, lab2 = gen(rng, spec, dup.size, state)
        X[dup] = Y
        lab[dup] = lab2
        dup = _duplicate_rows(X)
    if return_labels:
        return X, lab, state
    return X


def deduplicate(points):
    """Drop exact duplicate rows.

    Returns ``(unique_points, remap)`` where ``remap[i]`` is the row of
    input point ``i`` in ``unique_points``; first occurrences keep order.
    """
    _, first, inv = np.unique(points, axis=0, return_index=True,
                              return_inverse=True)
    inv = inv.ravel()
    keep = np.sort(first)
    new_id = np.empty(first.shape[0], dtype=np.int64)
    new_id[np.argsort(first)] = np.arange(first.shape[0])
    return points[keep], new_id[inv]


# --------------------------------------------------------------------------
# I/O


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in ("binary", "csv"):
            raise ValueError("format must be 'binary' or 'csv'")
        return fmt
    return "csv" if Path(path).suffix.lower() == ".csv" else "binary"


def save_points(points, path, fmt=None):
    """Write points in the PTS1 binary or the CSV format."""
    P = np.ascontiguousarray(points, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] not in (2, 3):
        raise FormatError("points must be (n, 2) or (n, 3)")
    if _infer_format(path, fmt) == "binary":
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<BQ", P.shape[1], P.shape[0]))
            fh.write(P.astype("<f8").tobytes())
    else:
        header = ",".join("xyz"[:P.shape[1]])
        np.savetxt(path, P, fmt="%.17g", delimiter=",", header=header,
                   comments="")


def load_points(path, fmt=None):
    """Read a point file written by :func:`save_points` (or any CSV with an
    ``x,y[,z]`` header).

    Raises
    ------
    FormatError
        Bad magic, unsupported dimension, truncated data or bad header.
    """
    if _infer_format(path, fmt) == "binary":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 13 or data[:4] != _MAGIC:
            raise FormatError("not a PTS1 file")
        dim, count = struct.unpack("<BQ", data[4:13])
        if dim not in (2, 3):
            raise FormatError(f"unsupported dimension {dim}")
        body = data[13:]
        if len(body) != 8 * dim * count:
            raise FormatError("point count does not match file size")
        P = np.frombuffer(body, dtype="<f8").reshape(count, dim)
        return P.astype(np.float64)
    with open(path) as fh:
        header = [h.strip() for h in fh.readline().split(",")]
        if header not in (["x", "y"], ["x", "y", "z"]):
            raise FormatError("CSV header must be x,y or x,y,z")
        P = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.float64)
    if P.size == 0:
        return np.empty((0, len(header)))
    if P.shape[1] != len(header):
        raise FormatError("row width does not match header")
    if not np.all(np.isfinite(P)):
        raise FormatError("non-finite coordinate")
    return P
