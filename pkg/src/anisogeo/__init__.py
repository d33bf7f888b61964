"""Anisotropic convex geometry relative to a gauge body.

Distances, projections and normals relative to a smooth strictly convex
gauge E; anisotropic area, curvature and support measures estimated from
shell sampling; mixed-volume tables with tangential-structure detection;
and a smooth relative-curvature pipeline with independent cross-checks.
"""
from . import bodies, cells, errors, gauges, measures, metric, mixed, oracles, rng, smooth
from ._dispatch import HAVE_COMPILED, kernel_name
from .bodies import (Ball, ConvexBody, EllipsoidBody, HullWithPoints,
                     MinkowskiCombination, SmoothBody, VPolytope,
                     body_from_json, make_tangential_body)
from .cells import BoundaryCellComplex, SpatialGrid
from .gauges import (BallGauge, EllipsoidGauge, GaugeBody, LpBallGauge,
                     SmoothedPolytopeGauge, gauge_from_json)
from .measures import (AreaMeasureProfile, CellMeasure, ProportionalityReport,
                       SupportMeasureEstimate, curvature_measures,
                       estimate_boundary_density, fit_area_measures,
                       fit_support_measures, proportionality_test)
from .metric import (EDistanceResult, ShellBatch, e_distance,
                     e_distance_batch, lipschitz_witness, parallel_membership,
                     shell_sample)
from .mixed import (ChainReport, MixedVolumeTable, TangentialReport, af_chain,
                    steiner_fit, tangential_detect, volume)
from .smooth import (Chart, RelShape, charts, integrate_area_measures_smooth,
                     jacobian_expansion_check, rel_tensors,
                     relative_normalization, sk_densities, sk_values)

__version__ = "0.1.0"
