"""Discrete ordinates upwind DG for the scaled slab radiative transfer equation."""

from .analysis import (
    ConvergenceReport, apriori_scaling_study, convergence_rates, convergence_study, error_norm,
    lambda_sweep, radau_project,
)
from .angular import AngularQuadrature, angular_average, build_quadrature
from .boundary import (
    BlendSpec, HFunctionTable, blended_boundary, boundary_corrector, compute_h_function, lambda_star,
)
from .mesh import Mesh1D, build_mesh, mesh_at_level, refine
from .operators import DgField, ProblemSpec
from .solver import SolveOptions, SolveResult, solve
from .transport import sweep

__all__ = [
    "AngularQuadrature", "angular_average", "build_quadrature",
    "Mesh1D", "build_mesh", "mesh_at_level", "refine",
    "DgField", "ProblemSpec", "sweep",
    "SolveOptions", "SolveResult", "solve",
    "BlendSpec", "HFunctionTable", "blended_boundary", "boundary_corrector", "compute_h_function",
    "lambda_star",
    "ConvergenceReport", "apriori_scaling_study", "convergence_rates", "convergence_study",
    "error_norm", "lambda_sweep", "radau_project",
]

__version__ = "0.1.0"
