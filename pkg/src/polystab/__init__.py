"""Lipschitz stability experiments for polygonal conductivity inclusions."""

__version__ = "0.1.0"

from .corner import corner_exponents, fit_corner_coefficients, lambda_of_k, matrix_M, sign_obstruction
from .currents import BoundaryCurrent, check_seo_condition, make_current, parse_currents
from .exceptions import DomainError, NumericError, PolystabError
from .forward import (
    Discretization,
    ForwardSolution,
    Trace,
    edge_fields,
    evaluate_interior,
    solve_forward,
    solve_forward_insulating,
    trace_distance,
    trace_of,
)
from .geometry import (
    AdmissibleClassParams,
    DomainBoundary,
    Polygon,
    VertexPerturbation,
    hausdorff_distance,
    interpolate_field,
    is_admissible,
    polygon_metric,
    sample_admissible_polygon,
)
from .inversion import ReconstructionConfig, lipschitz_experiment, reconstruct, residual
from .shape import (
    assemble_jacobian,
    injectivity_margin,
    solve_shape_derivative,
    solve_shape_derivative_insulating,
    transmission_jump_data,
)

__all__ = [
    "AdmissibleClassParams",
    "BoundaryCurrent",
    "Discretization",
    "DomainBoundary",
    "DomainError",
    "ForwardSolution",
    "NumericError",
    "Polygon",
    "PolystabError",
    "ReconstructionConfig",
    "Trace",
    "VertexPerturbation",
    "assemble_jacobian",
    "check_seo_condition",
    "corner_exponents",
    "edge_fields",
    "evaluate_interior",
    "fit_corner_coefficients",
    "hausdorff_distance",
    "injectivity_margin",
    "interpolate_field",
    "is_admissible",
    "lambda_of_k",
    "lipschitz_experiment",
    "make_current",
    "matrix_M",
    "parse_currents",
    "polygon_metric",
    "reconstruct",
    "residual",
    "sample_admissible_polygon",
    "sign_obstruction",
    "solve_forward",
    "solve_forward_insulating",
    "solve_shape_derivative",
    "solve_shape_derivative_insulating",
    "trace_distance",
    "trace_of",
    "transmission_jump_data",
]
