"""Limit laws for the maximum interpoint distance of random points in ellipsoids."""

from .geometry import (ConditionReport, DimensionMismatch, Ellipsoid, GeometryError,
                       Lemma1Violated, NonUniqueAxis, NotPositiveDefinite, PoleCaps,
                       PSuperellipsoid, check_body, check_condition3)
from .sampling import BetaOutOfRange, DistributionSpec, PointCloud, draw_cloud, sample
from .diameter import (RateSpec, TopKDistances, diameter, diameter_brute, diameter_pruned,
                       k_largest, scaled_statistic)
from .limitlaw import (EmptyProcess, LambdaBeta, LimitConfig, TruncatedParaboloid,
                       UniformDensity, bounds_distribution, limit_config_for,
                       paraboloid_mass, sample_prm)
from .experiments import (Ecdf, ExperimentReport, ks_distance, run_bounds_check,
                          run_convergence, run_limit, run_scaling_map_check)

__version__ = "0.1.0"
