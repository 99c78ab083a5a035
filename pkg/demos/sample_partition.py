"""Sample-based partitioning versus the cyclic baseline on clustered input."""

from sampledt.bench import coefficient_of_variation
from sampledt.samplepart import (PartitionConfig, cyclic_partition,
                                 partition_points)
from sampledt.workload import DistributionSpec, generate

P = generate(DistributionSpec("bubbles", 50_000, 3, seed=1))
k = 8
part = partition_points(P, PartitionConfig("sqrt", "logarithmic", k=k,
                                           seed=1))
cyc = cyclic_partition(P, k)
print(f"sample size {part.sample_point_ids.shape[0]}, "
      f"graph cut {part.cut}")
print("sample-based sizes:", part.sizes().tolist(),
      f"c_v={coefficient_of_variation(part.sizes()):.3f}")
print("cyclic sizes:      ", cyc.sizes().tolist(),
      f"c_v={coefficient_of_variation(cyc.sizes()):.3f}")
