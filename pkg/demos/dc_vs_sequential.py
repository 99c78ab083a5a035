"""Divide-and-conquer result is identical to the sequential triangulation."""

import time

import numpy as np

from sampledt.dc import DcConfig, delaunay_dc
from sampledt.seqdt import triangulate_seq
from sampledt.tristore import canonicalize, validate_delaunay
from sampledt.workload import DistributionSpec, generate

P = generate(DistributionSpec("bubbles", 100_000, 3, seed=0))

t0 = time.perf_counter()
S = triangulate_seq(P)
t_seq = time.perf_counter() - t0

cfg = DcConfig(k=8, strategy="kway", policy="grid=1", threads=2)
T, stats = delaunay_dc(P, cfg, return_stats=True)

same = np.array_equal(canonicalize(T), canonicalize(S))
print(f"sequential {t_seq:.2f} s, divide-and-conquer {stats.total_time:.2f} s")
print(f"{T.n_finite} simplices, identical to sequential: {same}")
print("phase times:", {k: round(v, 3) for k, v in stats.times.items()})
print("part sizes:", stats.leaf_sizes)
print("oracle:", validate_delaunay(T, limit=None).summary())
