"""Normalized rotating-frame dynamics of the circular restricted three-body problem.

The larger primary sits at (-mu, 0, 0) and the smaller at (1 - mu, 0, 0).
Distances are in units of the primary separation and time is scaled so the
frame rotates at unit rate. States are plain ``numpy`` arrays ordered
``(x, y, z, vx, vy, vz)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

SUN_EARTH_MU = 3.00348e-6
AU_KM = 1.495978707e8
SINGULARITY_RADIUS = 1e-12


class SingularityError(ValueError):
    """Raised when a position falls on top of one of the primaries."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver fails to meet its tolerance."""


class IntegrationError(RuntimeError):
    """Raised when the integrator cannot advance (e.g. step-size underflow)."""


class LagrangePoint(enum.IntEnum):
    L1 = 1
    L2 = 2
    L3 = 3
    L4 = 4
    L5 = 5

    @property
    def collinear(self) -> bool:
        return self <= LagrangePoint.L3

    @classmethod
    def parse(cls, value: "str | int | LagrangePoint") -> "LagrangePoint":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        if text.startswith("L"):
            text = text[1:]
        try:
            return cls(int(text))
        except ValueError:
            raise ValueError(f"unknown Lagrange point {value!r}") from None


class Family(enum.Enum):
    NORTHERN = "northern"
    SOUTHERN = "southern"

    @classmethod
    def parse(cls, value: "str | Family") -> "Family":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown halo family {value!r}") from None


@dataclass(frozen=True)
class SystemConfig:
    """Mass ratio, libration point, length unit and halo family of a run."""

    mu: float = SUN_EARTH_MU
    lagrange_point: LagrangePoint = LagrangePoint.L2
    length_unit_km: float = AU_KM
    family: Family = Family.NORTHERN

    def __post_init__(self):
        object.__setattr__(self, "lagrange_point", LagrangePoint.parse(self.lagrange_point))
        object.__setattr__(self, "family", Family.parse(self.family))
        if not 0.0 < self.mu < 0.5:
            raise ValueError(f"mu must lie in (0, 0.5), got {self.mu}")
        if not self.length_unit_km > 0.0:
            raise ValueError(f"length_unit_km must be positive, got {self.length_unit_km}")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 6)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


def _distances(x, y, z, mu):
    r1 = np.sqrt((x + mu) ** 2 + y**2 + z**2)
    r2 = np.sqrt((x - 1.0 + mu) ** 2 + y**2 + z**2)
    if np.any(r1 < SINGULARITY_RADIUS) or np.any(r2 < SINGULARITY_RADIUS):
        raise SingularityError(f"position ({x}, {y}, {z}) coincides with a primary")
    return r1, r2


def effective_potential(pos, mu: float) -> float:
    """Return U-bar = (x^2 + y^2)/2 + (1 - mu)/r1 + mu/r2."""
    x, y, z = pos
    r1, r2 = _distances(x, y, z, mu)
    return 0.5 * (x * x + y * y) + (1.0 - mu) / r1 + mu / r2


def potential_gradient(pos, mu: float) -> np.ndarray:
    x, y, z = pos
    r1, r2 = _distances(x, y, z, mu)
    a1 = (1.0 - mu) / r1**3
    a2 = mu / r2**3
    return np.array([
        x - a1 * (x + mu) - a2 * (x - 1.0 + mu),
        y - (a1 + a2) * y,
        -(a1 + a2) * z,
    ])


def potential_hessian(pos, mu: float) -> np.ndarray:
    x, y, z = pos
    r1, r2 = _distances(x, y, z, mu)
    dx1, dx2 = x + mu, x - 1.0 + mu
    a = (1.0 - mu) / r1**3 + mu / r2**3
    b1 = 3.0 * (1.0 - mu) / r1**5
    b2 = 3.0 * mu / r2**5
    uxy = (b1 * dx1 + b2 * dx2) * y
    uxz = (b1 * dx1 + b2 * dx2) * z
    uyz = (b1 + b2) * y * z
    return np.array([
        [1.0 - a + b1 * dx1**2 + b2 * dx2**2, uxy, uxz],
        [uxy, 1.0 - a + (b1 + b2) * y * y, uyz],
        [uxz, uyz, -a + (b1 + b2) * z * z],
    ])


def eom(state, mu: float) -> np.ndarray:
    """Time derivative of a rotating-frame state."""
    state = np.asarray(state, dtype=float)
    gx, gy, gz = potential_gradient(state[:3], mu)
    vx, vy, vz = state[3:6]
    return np.array([vx, vy, vz, gx + 2.0 * vy, gy - 2.0 * vx, gz])


def jacobi_integral(state, mu: float) -> float:
    """2 U-bar - v^2, conserved along any trajectory."""
    state = np.asarray(state, dtype=float)
    return 2.0 * effective_potential(state[:3], mu) - float(np.dot(state[3:6], state[3:6]))


def variational_rhs(t, y, mu):
    """Right-hand side for the state augmented with its 6x6 transition matrix."""
    out = np.empty_like(y)
    out[:6] = eom(y[:6], mu)
    jac = np.zeros((6, 6))
    jac[0:3, 3:6] = np.eye(3)
    jac[3:6, 0:3] = potential_hessian(y[:3], mu)
    jac[3, 4] = 2.0
    jac[4, 3] = -2.0
    out[6:] = (jac @ y[6:].reshape(6, 6)).ravel()
    return out


def _dUdx_axis(x: float, mu: float) -> float:
    return x - (1.0 - mu) * (x + mu) / abs(x + mu) ** 3 - mu * (x - 1.0 + mu) / abs(x - 1.0 + mu) ** 3


def _d2Udx2_axis(x: float, mu: float) -> float:
    return 1.0 + 2.0 * (1.0 - mu) / abs(x + mu) ** 3 + 2.0 * mu / abs(x - 1.0 + mu) ** 3


def _collinear_root(mu, lo, hi, guess, max_iter=200, tol=1e-12):
    # Newton safeguarded by bisection; dU/dx is increasing on each bracket.
    x = guess
    for _ in range(max_iter):
        f = _dUdx_axis(x, mu)
        if abs(f) < 1e-15:
            return x
        if f > 0.0:
            hi = x
        else:
            lo = x
        step = x - f / _d2Udx2_axis(x, mu)
        x_new = step if lo < step < hi else 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-16 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    if abs(_dUdx_axis(x, mu)) > tol:
        raise ConvergenceError(f"collinear point did not converge: residual {_dUdx_axis(x, mu):.3e}")
    return x


def collinear_point(mu: float, point: "LagrangePoint | int") -> float:
    """x-coordinate of L1, L2 or L3."""
    point = LagrangePoint.parse(point)
    hill = (mu / 3.0) ** (1.0 / 3.0)
    pad = 1e-9
    if point == LagrangePoint.L1:
        return _collinear_root(mu, -mu + pad, 1.0 - mu - pad, 1.0 - mu - hill)
    if point == LagrangePoint.L2:
        return _collinear_root(mu, 1.0 - mu + pad, 2.0, 1.0 - mu + hill)
    if point == LagrangePoint.L3:
        return _collinear_root(mu, -2.0, -mu - pad, -1.0 - 5.0 * mu / 12.0)
    raise ValueError(f"{point.name} is not collinear")


def lagrange_points(mu: float) -> np.ndarray:
    """All five equilibria as a (5, 3) array ordered L1..L5."""
    if not 0.0 < mu < 0.5:
        raise ValueError(f"mu must lie in (0, 0.5), got {mu}")
    pts = np.zeros((5, 3))
    for i, p in enumerate((LagrangePoint.L1, LagrangePoint.L2, LagrangePoint.L3)):
        pts[i, 0] = collinear_point(mu, p)
    half_root3 = math.sqrt(3.0) / 2.0
    pts[3] = (0.5 - mu, half_root3, 0.0)
    pts[4] = (0.5 - mu, -half_root3, 0.0)
    return pts


def integrate(state0, mu: float, t_span, tol: float = 1e-12, t_eval=None, events=None,
              dense_output: bool = False):
    """Propagate ``state0`` over ``t_span`` with DOP853 at rtol = atol = ``tol``.

    Returns a :class:`Trajectory` sampled at ``t_eval``, or at the
    integrator's own steps when ``t_eval`` is None. Backward spans are
    returned in increasing time order.
    """
    sol = propagate(state0, mu, t_span, tol=tol, t_eval=t_eval, events=events,
                    dense_output=dense_output)
    times, states = sol.t, sol.y.T
    if times[0] > times[-1]:
        times, states = times[::-1], states[::-1]
    return Trajectory(times.copy(), states.copy())


def propagate(state0, mu: float, t_span, tol: float = 1e-12, t_eval=None, events=None,
              dense_output: bool = False, stm: bool = False):
    """Thin wrapper around ``solve_ivp`` that raises on integrator failure."""
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    t0, t1 = (float(v) for v in t_span)
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise ValueError("t_span must be finite")
    y0 = np.asarray(state0, dtype=float)
    if stm:
        y0 = np.concatenate([y0[:6], np.eye(6).ravel()])
        rhs = variational_rhs
    else:
        def rhs(t, y, mu):
            return eom(y, mu)
    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=tol, atol=tol,
                    t_eval=t_eval, events=events, dense_output=dense_output, args=(mu,))
    if sol.status < 0:
        raise IntegrationError(sol.message)
    return sol
