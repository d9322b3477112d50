"""Pointwise geometry, chart operators and quadrature."""

from .core import (
    GeometrySample,
    KillingField,
    LocalGeometry,
    ParametricHypersurface,
    graph_quantity,
    local_geometry,
    metric_at,
    q_quantity,
    sample,
    shape_operator,
    support_function,
    unit_normal,
)
from .operators import (
    boundary_frame,
    covariant_second_form,
    geometric_field,
    laplace_beltrami,
    nabla_A_norm_sq,
    surface_gradient,
)
from .quadrature import (
    QuadratureRule,
    boundary_volume,
    integrate_boundary,
    integrate_surface,
    surface_area,
)

__all__ = [
    "GeometrySample",
    "KillingField",
    "LocalGeometry",
    "ParametricHypersurface",
    "QuadratureRule",
    "boundary_frame",
    "boundary_volume",
    "covariant_second_form",
    "geometric_field",
    "graph_quantity",
    "integrate_boundary",
    "integrate_surface",
    "laplace_beltrami",
    "local_geometry",
    "metric_at",
    "nabla_A_norm_sq",
    "q_quantity",
    "sample",
    "shape_operator",
    "support_function",
    "surface_area",
    "surface_gradient",
    "unit_normal",
]
