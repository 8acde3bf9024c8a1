"""Map a point near a collinear libration point to the halo orbit through it.

The z series is inverted exactly for the orbit time (a cubic in cos(wt)),
which turns the x series into a function of (z1, Az) alone. Three search
strategies over Az build on these two pieces:

* ``method1`` drives ``|x1 - g(z1, Az)|`` below ``tol_x``;
* ``method2`` keeps Method 1 answers whose reconstructed position is close
  enough, re-searching the rest on the full position-error norm;
* ``method3`` additionally runs the norm search on points Method 1 left
  unsolved.

Every search samples a uniform Az grid, then re-centres a narrower grid on
the best sample until the tolerance is met or the passes run out.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .cubic import real_cubic_roots
from .lp_series import BifurcationError, LpCoefficients, ax_squared, frequency, harmonics, eval_lp


class NoTimeSolution(ValueError):
    """z1 is not reachable by the series at this amplitude."""


class Disposition(str, enum.Enum):
    METHOD1_ACCEPTED = "Method1Accepted"
    METHOD2_REFINED = "Method2Refined"
    METHOD2_UNIQUE = "Method2Unique"
    DISCARDED = "Discarded"
    UNSOLVED = "Unsolved"


@dataclass(frozen=True)
class SolverSettings:
    az_lo_km: float = 100.0
    az_hi_km: float = 1.0e6
    grid_points_per_pass: int = 512
    shrink_factor: float = 10.0
    max_passes: int = 8
    tol_x: float = 1e-7
    tol_norm_trigger: float = 1e-3
    tol_norm_accept: float = 1e-4
    halfperiod_guess: float = math.pi / 2.0
    halfperiod_bracket_width: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.az_lo_km < self.az_hi_km:
            raise ValueError("need 0 < az_lo_km < az_hi_km")
        for name in ("tol_x", "tol_norm_trigger", "tol_norm_accept", "halfperiod_bracket_width"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.grid_points_per_pass < 2 or self.max_passes < 1:
            raise ValueError("need at least 2 grid points and 1 pass")
        if not self.shrink_factor > 1.0:
            raise ValueError("shrink_factor must exceed 1")


@dataclass(frozen=True)
class HaloSolution:
    t: float | None
    az_km: float | None
    error_norm: float
    per_coordinate_errors: tuple
    disposition: Disposition
    objective: float = math.nan
    passes: int = 0

    @property
    def accepted(self) -> bool:
        return self.disposition in (Disposition.METHOD1_ACCEPTED, Disposition.METHOD2_REFINED,
                                    Disposition.METHOD2_UNIQUE)

    @property
    def recovered(self) -> bool:
        return self.t is not None


UNSOLVED = HaloSolution(None, None, math.nan, (math.nan,) * 3, Disposition.UNSOLVED)


def position_error_norm(p1, p2) -> float:
    return float(np.linalg.norm(np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float)))


def query_from_km(position_km, coeffs: LpCoefficients) -> np.ndarray:
    """Barycentric km -> normalized barycentric coordinates."""
    return np.asarray(position_km, dtype=float) / coeffs.length_unit_km


# --- time inversion -------------------------------------------------------------

def _amplitudes(az_nd, coeffs):
    """(ax, w) on a grid; NaN where Az is below the bifurcation."""
    ax2 = ax_squared(az_nd, coeffs)
    ax = np.sqrt(np.where(ax2 >= 0.0, ax2, np.nan))
    return ax, frequency(az_nd, coeffs, ax)


def _cos_candidates(z1, Z, gamma):
    """Roots c = cos(wt) in [-1, 1] of the z series, shape (n, 3), NaN padded."""
    z0, z1c, z2c, z3c = (Z[..., j] for j in range(4))
    # cos 2th = 2c^2 - 1, cos 3th = 4c^3 - 3c
    roots = real_cubic_roots(4.0 * z3c, 2.0 * z2c, z1c - 3.0 * z3c, z0 - z2c - z1 / gamma)
    roots = np.where(np.abs(roots) <= 1.0 + 1e-12, np.clip(roots, -1.0, 1.0), np.nan)
    return roots


def time_candidates(z1: float, az_nd, coeffs: LpCoefficients):
    """Vectorized solve_time: (n, 3) array of t in [0, T/2], NaN padded."""
    az = np.atleast_1d(np.asarray(az_nd, dtype=float))
    ax, w = _amplitudes(az, coeffs)
    _, _, Z = harmonics(ax, az, coeffs)
    c = _cos_candidates(float(z1), Z, coeffs.gamma)
    return np.arccos(c) / w[:, None]


def solve_time(z1: float, az_nd: float, coeffs: LpCoefficients) -> list:
    """All t in [0, T/2] with z(t, Az) = z1, ascending.

    Raises :class:`NoTimeSolution` when no root of the cubic in cos(wt)
    lies in [-1, 1].
    """
    if ax_squared(az_nd, coeffs) < 0.0:
        raise BifurcationError("Az is below the halo bifurcation amplitude")
    t = time_candidates(z1, az_nd, coeffs)[0]
    t = np.sort(t[np.isfinite(t)])
    if t.size == 0:
        raise NoTimeSolution(f"z1={z1!r} is unreachable at Az={az_nd!r}")
    return [float(v) for v in t]


def x_of(z1: float, az_nd: float, coeffs: LpCoefficients, t_choice: float | None = None):
    """g(z1, Az): the x series at a time solving the z equation.

    With ``t_choice=None`` every root from :func:`solve_time` is used and a
    list is returned.
    """
    if t_choice is None:
        return [x_of(z1, az_nd, coeffs, t) for t in solve_time(z1, az_nd, coeffs)]
    return float(eval_lp(t_choice, az_nd, coeffs)[0])


def _y_local(t, ax, az, w, coeffs):
    _, Y, _ = harmonics(ax, az, coeffs)
    th = w * t
    return Y[..., 1] * np.sin(th) + Y[..., 2] * np.sin(2.0 * th) + Y[..., 3] * np.sin(3.0 * th)


def _half_period_many(ax, az, w, coeffs, guess, width, xtol=1e-12):
    """Bisection for y(t) = 0 near ``guess``; NaN where no sign change after one widening."""
    lo = np.full(az.shape, guess - width)
    hi = np.full(az.shape, guess + width)
    f_lo = _y_local(lo, ax, az, w, coeffs)
    f_hi = _y_local(hi, ax, az, w, coeffs)
    bad = np.sign(f_lo) * np.sign(f_hi) > 0.0
    if np.any(bad):
        lo = np.where(bad, guess - 2.0 * width, lo)
        hi = np.where(bad, guess + 2.0 * width, hi)
        f_lo = _y_local(lo, ax, az, w, coeffs)
        f_hi = _y_local(hi, ax, az, w, coeffs)
    failed = (np.sign(f_lo) * np.sign(f_hi) > 0.0) | ~np.isfinite(f_lo * f_hi)
    n_iter = int(math.ceil(math.log2(4.0 * width / xtol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        f_mid = _y_local(mid, ax, az, w, coeffs)
        left = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(left, mid, lo)
        f_lo = np.where(left, f_mid, f_lo)
        hi = np.where(left, hi, mid)
    return np.where(failed, np.nan, 0.5 * (lo + hi))


def estimate_half_period(az_nd, coeffs: LpCoefficients, guess: float = math.pi / 2.0,
                         width: float = 0.5):
    """Time of the y = 0 crossing of the series nearest ``guess`` (the half period).

    The bracket ``guess +/- width`` is widened once if it holds no sign
    change; a second miss raises ``ValueError``.
    """
    az = np.asarray(az_nd, dtype=float)
    if np.any(ax_squared(az, coeffs) < 0.0):
        raise BifurcationError("Az is below the halo bifurcation amplitude")
    ax, w = _amplitudes(az, coeffs)
    half = _half_period_many(np.atleast_1d(ax), np.atleast_1d(az), np.atleast_1d(w),
                             coeffs, guess, width)
    if np.any(np.isnan(half)):
        raise ValueError("no y = 0 crossing near the guessed half period")
    return float(half[0]) if az.ndim == 0 else half.reshape(az.shape)


def adjust_time(t: float, y1: float, half_period: float) -> float:
    """Mirror ``t`` into the second half of the orbit when y1 is positive."""
    return t if y1 <= 0.0 else 2.0 * half_period - t


def refine_range(best_az: float, current_range, pass_index: int, settings: SolverSettings):
    """Narrow the Az search window around ``best_az`` by ``shrink_factor``."""
    lo, hi = current_range
    half = 0.5 * (hi - lo) / settings.shrink_factor
    return max(settings.az_lo_km, best_az - half), min(settings.az_hi_km, best_az + half)


# --- grid objectives --------------------------------------------------------------

def _grid_x(query, az_km, coeffs):
    """|x1 - g| for every Az sample and cubic root: returns (objective, t) of shape (n, 3)."""
    x1, _, z1 = query
    az = coeffs.az_nd(az_km)
    ax, w = _amplitudes(az, coeffs)
    X, _, Z = harmonics(ax, az, coeffs)
    c = _cos_candidates(z1, Z, coeffs.gamma)
    th = np.arccos(c)
    k = np.arange(4.0)
    x_loc = np.sum(X[:, None, :] * np.cos(th[..., None] * k), axis=-1)
    g = coeffs.offset + coeffs.gamma * x_loc
    return np.abs(x1 - g), th / w[:, None]


def _grid_norm(query, az_km, coeffs, settings):
    """Position-error norm for every Az sample and root, with the y1 half adjustment."""
    x1, y1, z1 = query
    az = coeffs.az_nd(az_km)
    ax, w = _amplitudes(az, coeffs)
    X, Y, Z = harmonics(ax, az, coeffs)
    c = _cos_candidates(z1, Z, coeffs.gamma)
    t = np.arccos(c) / w[:, None]
    if y1 > 0.0:
        half = _half_period_many(ax, az, w, coeffs, settings.halfperiod_guess,
                                 settings.halfperiod_bracket_width)
        t = 2.0 * half[:, None] - t
    th = (w[:, None] * t)[..., None] * np.arange(4.0)
    g = coeffs.gamma
    x2 = coeffs.offset + g * np.sum(X[:, None, :] * np.cos(th), axis=-1)
    y2 = g * np.sum(Y[:, None, :] * np.sin(th), axis=-1)
    z2 = g * np.sum(Z[:, None, :] * np.cos(th), axis=-1)
    norm = np.sqrt((x2 - x1) ** 2 + (y2 - y1) ** 2 + (z2 - z1) ** 2)
    return norm, t


@dataclass
class _Search:
    az_km: float = math.nan
    t: float = math.nan
    objective: float = math.inf
    passes: int = 0
    converged: bool = False


def _grid_search(evaluate, tol, settings: SolverSettings) -> _Search:
    best = _Search()
    lo, hi = settings.az_lo_km, settings.az_hi_km
    for p in range(settings.max_passes):
        grid = np.linspace(lo, hi, settings.grid_points_per_pass)
        obj, t = evaluate(grid)
        obj = np.where(np.isfinite(obj), obj, np.inf)
        flat = int(np.argmin(obj))
        i, j = divmod(flat, obj.shape[1])
        best.passes = p + 1
        if obj[i, j] < best.objective:
            best.objective, best.az_km, best.t = float(obj[i, j]), float(grid[i]), float(t[i, j])
        if not math.isfinite(best.objective):
            break  # z1 unreachable across the whole window
        if best.objective <= tol:
            best.converged = True
            break
        lo, hi = refine_range(best.az_km, (lo, hi), p, settings)
    return best


def _solution(query, t, az_km, coeffs, disposition, search):
    recon = eval_lp(t, coeffs.az_nd(az_km), coeffs)
    diff = recon - np.asarray(query, dtype=float)
    return HaloSolution(t=float(t), az_km=float(az_km), error_norm=float(np.linalg.norm(diff)),
                        per_coordinate_errors=tuple(float(v) for v in diff),
                        disposition=disposition, objective=search.objective, passes=search.passes)


def _as_query(query) -> np.ndarray:
    q = np.asarray(query, dtype=float).reshape(3)
    if not np.all(np.isfinite(q)):
        raise ValueError("query position must be finite")
    return q


# --- methods ----------------------------------------------------------------------

def method1(query, settings: SolverSettings, coeffs: LpCoefficients) -> HaloSolution:
    """Minimize |x1 - g(z1, Az)| over Az; accept at ``tol_x``."""
    q = _as_query(query)
    search = _grid_search(lambda grid: _grid_x(q, grid, coeffs), settings.tol_x, settings)
    if not search.converged:
        return UNSOLVED
    half = estimate_half_period(coeffs.az_nd(search.az_km), coeffs, settings.halfperiod_guess,
                                settings.halfperiod_bracket_width)
    t = adjust_time(search.t, q[1], half)
    return _solution(q, t, search.az_km, coeffs, Disposition.METHOD1_ACCEPTED, search)


def norm_search(query, settings: SolverSettings, coeffs: LpCoefficients):
    """Minimize the full position-error norm over Az; ``None`` if ``tol_norm_accept`` is missed."""
    q = _as_query(query)
    search = _grid_search(lambda grid: _grid_norm(q, grid, coeffs, settings),
                          settings.tol_norm_accept, settings)
    return search if search.converged else None


def method2(query, settings: SolverSettings, coeffs: LpCoefficients,
            first: HaloSolution | None = None) -> HaloSolution:
    """Method 1 followed by a norm-based re-search of answers that land too far away."""
    q = _as_query(query)
    first = method1(q, settings, coeffs) if first is None else first
    if not first.accepted:
        return UNSOLVED
    if first.error_norm <= settings.tol_norm_trigger:
        return first
    search = norm_search(q, settings, coeffs)
    if search is None:
        return HaloSolution(first.t, first.az_km, first.error_norm, first.per_coordinate_errors,
                            Disposition.DISCARDED, first.objective, first.passes)
    return _solution(q, search.t, search.az_km, coeffs, Disposition.METHOD2_REFINED, search)


@dataclass(frozen=True)
class Trace:
    """All three method outcomes for one query (Method 2 and 3 reuse Method 1's work)."""
    method1: HaloSolution
    method2: HaloSolution
    method3: HaloSolution = field(default=UNSOLVED)

    def for_method(self, k: int) -> HaloSolution:
        return (self.method1, self.method2, self.method3)[k - 1]


def trace(query, settings: SolverSettings, coeffs: LpCoefficients) -> Trace:
    q = _as_query(query)
    m1 = method1(q, settings, coeffs)
    m2 = method2(q, settings, coeffs, first=m1)
    m3 = m2
    if m1.disposition == Disposition.UNSOLVED:
        search = norm_search(q, settings, coeffs)
        if search is not None:
            m3 = _solution(q, search.t, search.az_km, coeffs, Disposition.METHOD2_UNIQUE, search)
    return Trace(m1, m2, m3)


def method3(query_set, settings: SolverSettings, coeffs: LpCoefficients) -> list:
    """Method 2 on every query plus the norm search on Method 1's unsolved ones."""
    return [trace(q, settings, coeffs).method3 for q in query_set]
