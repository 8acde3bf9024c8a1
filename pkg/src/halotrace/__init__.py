"""Locate the halo orbit (t, Az) through a point near a collinear libration point."""

from .cr3bp import (
    ConvergenceError,
    Family,
    IntegrationError,
    LagrangePoint,
    SingularityError,
    SystemConfig,
    Trajectory,
    collinear_point,
    effective_potential,
    eom,
    integrate,
    jacobi_integral,
    lagrange_points,
    potential_gradient,
)
from .halo import CorrectorError, HaloOrbit, TruthPoint, correct_halo, differential_correct, richardson_guess
from .inverse import (
    Disposition,
    HaloSolution,
    NoTimeSolution,
    SolverSettings,
    estimate_half_period,
    method1,
    method2,
    method3,
    solve_time,
    trace,
    x_of,
)
from .lp_series import BifurcationError, LpCoefficients, build_coefficients, eval_lp, eval_lp_state, lp_period

__version__ = "0.1.0"
