"""Comparison results for anisotropic parabolic problems, checked numerically.

The package discretizes u_t - sum_i d_i(alpha_i |d_i u|^{p_i-2} d_i u) = f in
time by implicit Euler, solves the symmetrized radial problem alongside it,
and verifies that the rearranged solution is concentration-dominated by the
radial one.
"""

__version__ = "0.1.0"

from .aniso_core import AnisotropicCoefficients, YoungFunctionPhi, harmonic_mean, lambda_constant, phi_eval
from .elliptic import ConvergenceError, EllipticProblem, solve_elliptic
from .parabolic import (
    ParabolicScenario,
    TimeGrid,
    TrajectoryRecord,
    advance_anisotropic,
    advance_symmetrized,
    energy_monitor,
    symmetrize,
)
from .profiles import DecreasingProfile, GridFunction, RadialProfile
from .radial import RadialEllipticProblem, radial_elliptic_solve, radial_parabolic_step, smallest_dirichlet_eigenvalue
from .rearrange import decreasing_rearrangement, lorentz_norm, radial_rearrangement

__all__ = [
    "AnisotropicCoefficients",
    "ConvergenceError",
    "DecreasingProfile",
    "EllipticProblem",
    "GridFunction",
    "ParabolicScenario",
    "RadialEllipticProblem",
    "RadialProfile",
    "TimeGrid",
    "TrajectoryRecord",
    "YoungFunctionPhi",
    "advance_anisotropic",
    "advance_symmetrized",
    "decreasing_rearrangement",
    "energy_monitor",
    "harmonic_mean",
    "lambda_constant",
    "lorentz_norm",
    "phi_eval",
    "radial_elliptic_solve",
    "radial_parabolic_step",
    "radial_rearrangement",
    "smallest_dirichlet_eigenvalue",
    "solve_elliptic",
    "symmetrize",
]
