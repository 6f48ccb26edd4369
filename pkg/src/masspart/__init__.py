"""Convex equipartitions of point-cloud measures, their hyperplane-avoidance
audits, low-complexity partitions and central transversals."""

__version__ = "0.1.0"

from .errors import (BadSpec, DegenerateInput, EmptyMeasure, InsufficientSupport,  # noqa: E402
                     MassPartError, NoConvergence, NotWellSeparated, ParallelProjection,
                     SchemaMismatch)
from .geometry import Halfspace, Hyperplane, OrthoFrame, Region, Subspace  # noqa: E402
from .measure import DensitySpec, Measure, generate, make_measure, mass, quantile  # noqa: E402
from .yao import (Partition, alpha_beta_partition, multicenter_partition,  # noqa: E402
                  yao_partition)
from .complexity import (ComplexityPartition, d2x_partition, low_complexity_partition,  # noqa: E402
                         partition_2d, partition_3d)
from .verify import (AuditReport, audit_avoidance, audit_center_monotonicity,  # noqa: E402
                     audit_coverage, audit_equipartition, audit_frame_invariance,
                     audit_skeleton)
