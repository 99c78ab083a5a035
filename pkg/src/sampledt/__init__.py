"""Parallel divide-and-conquer Delaunay triangulation in 2D and 3D with
sample-based graph partitioning."""

from .geometry import (Box, DegenerateSimplex, Sphere, box_sphere_overlap,
                       circumsphere, halfspace_box_overlap, in_sphere,
                       orient)
from .tristore import (INFINITE, NONE, OracleLimitExceeded, Triangulation,
                       ValidityReport, canonicalize, facet_key,
                       load_triangulation_csv, save_triangulation_csv,
                       validate_delaunay)
from .seqdt import DegenerateInput, DuplicatePoint, triangulate_seq
from .graphpart import (GraphPartition, InfeasibleBalance, SampleGraph,
                        cut_weight, partition)
from .samplepart import (KNotPowerOfTwo, PartitionConfig, Partitioning,
                         SampleRule, SampleTooSmall, cyclic_partition,
                         partition_points)
from .bordergeom import (GridIndex, IntersectionPolicy, build_grid_index,
                         intersects_bbox, intersects_exact, intersects_grid)
from .dc import (BorderSet, DanglingFacet, DcConfig, DcStats,
                 InconsistentMerge, delaunay_dc, find_border, merge)
from .workload import (DistributionSpec, FormatError, generate, load_points,
                       save_points)
from .bench import (UndefinedForSinglePart, coefficient_of_variation,
                    ideal_deviation, overtriangulation, run_experiment)

__version__ = "0.1.0"
