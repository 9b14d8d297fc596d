"""Null control of a degenerate parabolic equation on a domain with a free boundary.

The moving interval ``0 < x < l(t)`` is mapped to the fixed interval
``0 < zeta < L0``; the transformed problem is marched with implicit Euler, its
discrete adjoint is the exact weighted transpose, approximate null controls
come from a Gramian iteration, and the free boundary is found as a fixed point.
"""
from ._accel import USE_NUMBA
from .adjoint import AdjointField, ControlField, duality_gap, solve_adjoint
from .config import (ConfigError, ConvergenceError, DegenerateRatioError, DomainError, FBControlError,
                     MembershipError, ProblemConfig, SolverError, control_reference_config, reference_config)
from .forward import TransformedField, solve_forward, weighted_norms
from .free_boundary import beta_continuation, fixed_point_solve, holder_norm, lambda_map, membership_check
from .hum import HUMReport, cost_check, functional_J, gramian_apply, hum_solve, minimize_functional
from .transform import BoundaryTrajectory

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA",
    "AdjointField", "ControlField", "duality_gap", "solve_adjoint",
    "ConfigError", "ConvergenceError", "DegenerateRatioError", "DomainError", "FBControlError",
    "MembershipError", "ProblemConfig", "SolverError", "control_reference_config", "reference_config",
    "TransformedField", "solve_forward", "weighted_norms",
    "beta_continuation", "fixed_point_solve", "holder_norm", "lambda_map", "membership_check",
    "HUMReport", "cost_check", "functional_J", "gramian_apply", "hum_solve", "minimize_functional",
    "BoundaryTrajectory",
]
