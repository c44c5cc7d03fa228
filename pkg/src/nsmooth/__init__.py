"""Numerical nonsmooth analysis on constant-curvature manifolds."""

from .manifold import Euclidean, FlatTorus, Frame, Manifold, Sphere, Tangent, jacobi_endpoint
from .quadrature import ball_quadrature, ball_quadrature_qmc, sphere_quadrature
from .minnorm import MinNormResult, min_norm_point
from .clarke import (
    HullSample,
    LinearMapRep,
    MapField,
    SamplingParams,
    ScalarField,
    SingularityVerdict,
    adjoint,
    generalized_differential,
    generalized_gradient,
    gs_critical,
    is_singular_map,
    is_singular_scalar,
    sample_mixture,
)
from .smoothing import (
    Cover,
    MollifierSpec,
    PartitionOfUnity,
    SmoothedMap,
    build_cover,
    build_partition,
    build_smoothed,
    global_smooth,
    grad_global_smooth,
    lambda_eps,
    lipschitz_estimate,
    local_smooth,
    max_error_on_grid,
    mollifier_alpha,
)
from .fibration import EmbeddingSpec, Fibration, FibrationReport, compose_fibration, embed, eta_search, submersion_check
from .catalog import FieldCatalogEntry, build_entry, build_field_expr, catalog_names
from .experiments import ScanReport, equivalence_scan, nonvanishing_scan, reeb_check, singular_scan

__version__ = "0.1.0"
