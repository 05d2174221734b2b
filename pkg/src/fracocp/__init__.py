"""Finite element optimal control of the 1D integral fractional Laplacian.

The state constraint u <= u_b is handled by a Moreau-Yosida penalty that is
driven to the constrained limit by γ-continuation.
"""
from .assembly import FracOperator, assemble_operator, assemble_stiffness, normalization_constant
from .estimator import FractionalControlEstimator
from .exceptions import (
    ConfigurationError,
    ConvergenceWarning,
    DimensionError,
    DomainError,
    FitError,
    FracOCPError,
    IntegrationError,
    OperatorError,
    OracleError,
    ParameterError,
)
from .mesh import Mesh, P0Function, P1Function, build_mesh, build_uniform_mesh
from .ocp import (
    OcpSolution,
    PathReport,
    ProblemConfig,
    gamma_continuation,
    gradient,
    kkt_residual,
    objective,
    project_control,
    recover_multiplier,
    solve_fixed_gamma,
)
from .pde import solve_adjoint, solve_state

__version__ = "0.1.0"

__all__ = [
    "FracOperator",
    "assemble_operator",
    "assemble_stiffness",
    "normalization_constant",
    "FractionalControlEstimator",
    "ConfigurationError",
    "ConvergenceWarning",
    "DimensionError",
    "DomainError",
    "FitError",
    "FracOCPError",
    "IntegrationError",
    "OperatorError",
    "OracleError",
    "ParameterError",
    "Mesh",
    "P0Function",
    "P1Function",
    "build_mesh",
    "build_uniform_mesh",
    "OcpSolution",
    "PathReport",
    "ProblemConfig",
    "gamma_continuation",
    "gradient",
    "kkt_residual",
    "objective",
    "project_control",
    "recover_multiplier",
    "solve_fixed_gamma",
    "solve_adjoint",
    "solve_state",
]
