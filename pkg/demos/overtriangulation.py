"""Overtriangulation factor across dividers, strategies and policies."""

from sampledt.bench import overtriangulation
from sampledt.dc import DcConfig, delaunay_dc
from sampledt.workload import DistributionSpec, generate

n = 100_000
for kind in ("uniform", "bubbles"):
    P = generate(DistributionSpec(kind, n, 3, seed=0))
    for divider, strategy, policy in [("sample", "kway", "grid=1"),
                                      ("sample", "bisect", "grid=1"),
                                      ("cyclic", "kway", "grid=1"),
                                      ("sample", "kway", "bbox"),
                                      ("sample", "kway", "exact=1")]:
        cfg = DcConfig(k=8, divider=divider, strategy=strategy,
                       policy=policy)
        _, st = delaunay_dc(P, cfg, return_stats=True)
        o = overtriangulation(n, st.sample_sizes, st.border_vertex_counts)
        print(f"{kind:8s} {divider:6s} {strategy:6s} {policy:8s} "
              f"o_DT={o:.4f} borders={st.border_vertex_counts}")
