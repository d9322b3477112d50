"""Triangle meshes with boundary on S^2: construction, discrete curvature, descent."""

from .builders import annulus, catenoid_mesh, flat_disk, graph_disk, sphere_cap_mesh
from .discrete import (
    boundary_orthogonality,
    discrete_A2,
    discrete_isoperimetric_residual,
    discrete_mean_curvature,
    flatness_metrics,
)
from .solver import SolverConfig, SolveResult, find_critical_annulus, minimize, write_trace_csv
from .trimesh import TriMesh

__all__ = [
    "SolveResult",
    "SolverConfig",
    "TriMesh",
    "annulus",
    "boundary_orthogonality",
    "catenoid_mesh",
    "discrete_A2",
    "discrete_isoperimetric_residual",
    "discrete_mean_curvature",
    "find_critical_annulus",
    "flat_disk",
    "flatness_metrics",
    "graph_disk",
    "minimize",
    "sphere_cap_mesh",
    "write_trace_csv",
]
