"""Ground-truth halo orbits: Richardson initial guesses refined by differential correction."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cr3bp import (
    ConvergenceError,
    IntegrationError,
    SingularityError,
    SystemConfig,
    Trajectory,
    eom,
    integrate,
    propagate,
)
from .lp_series import LpCoefficients, build_coefficients, eval_lp, eval_lp_state, lp_period

log = logging.getLogger(__name__)


class CorrectorError(ConvergenceError):
    def __init__(self, message, residual=math.nan, iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class HaloOrbit:
    az_km: float
    initial_state: np.ndarray
    half_period: float
    trajectory: Trajectory
    iterations: int = 0
    residual: float = 0.0

    @property
    def period(self) -> float:
        return 2.0 * self.half_period


@dataclass(frozen=True)
class TruthPoint:
    position: np.ndarray
    true_t: float
    true_az_km: float
    orbit_id: int


def richardson_guess(az_km: float, coeffs: LpCoefficients) -> np.ndarray:
    """Series state at t = 0: the perpendicular x-z plane crossing."""
    if not az_km > 0.0:
        raise ValueError(f"az_km must be positive, got {az_km}")
    state = eval_lp_state(0.0, coeffs.az_nd(az_km), coeffs)
    # the sine series and the cosine derivatives vanish identically at t = 0
    state[1] = state[3] = state[5] = 0.0
    return state


def _crossing_event(direction):
    def event(t, y, mu):
        return y[1]
    event.terminal = True
    event.direction = direction
    return event


def _half_period_crossing(state0, mu, tol, t_max):
    direction = 1.0 if state0[4] < 0.0 else -1.0
    sol = propagate(state0, mu, (0.0, t_max), tol=tol, events=[_crossing_event(direction)], stm=True)
    if not sol.t_events[0].size:
        raise CorrectorError("no y = 0 crossing found within the search window")
    return sol.t_events[0][0], sol.y_events[0][0]


def differential_correct(guess, mu: float, tol: float = 1e-12, max_iter: int = 25,
                         int_tol: float = 1e-12, az_km: float = math.nan,
                         n_samples: int = 1000, t_max: float = 2.0 * math.pi) -> HaloOrbit:
    """Hold z0 fixed and adjust (x0, vy0) until the half-period crossing is perpendicular.

    The y = 0 crossing is located by event detection; the update uses the
    state-transition matrix with the crossing-time variation eliminated.
    """
    s0 = np.zeros(6)
    s0[0], s0[2], s0[4] = guess[0], guess[2], guess[4]
    residual = math.inf
    for it in range(max_iter + 1):
        t_half, yf = _half_period_crossing(s0, mu, int_tol, t_max)
        xf = yf[:6]
        phi = yf[6:].reshape(6, 6)
        residual = max(abs(xf[3]), abs(xf[5]))
        if residual < tol:
            break
        if it == max_iter:
            raise CorrectorError(f"corrector did not converge after {max_iter} iterations "
                                 f"(residual {residual:.3e})", residual, it)
        acc = eom(xf, mu)
        vy = xf[4]
        jac = np.array([
            [phi[3, 0] - acc[3] * phi[1, 0] / vy, phi[3, 4] - acc[3] * phi[1, 4] / vy],
            [phi[5, 0] - acc[5] * phi[1, 0] / vy, phi[5, 4] - acc[5] * phi[1, 4] / vy],
        ])
        dx0, dvy0 = np.linalg.solve(jac, [-xf[3], -xf[5]])
        s0[0] += dx0
        s0[4] += dvy0
        if not np.all(np.isfinite(s0)):
            raise CorrectorError("corrector produced a non-finite state", residual, it)
    period = 2.0 * t_half
    traj = integrate(s0, mu, (0.0, period), tol=int_tol,
                     t_eval=np.linspace(0.0, period, n_samples + 1))
    return HaloOrbit(az_km=float(az_km), initial_state=s0, half_period=float(t_half),
                     trajectory=traj, iterations=it, residual=float(residual))


def correct_halo(az_km: float, coeffs: LpCoefficients, **kwargs) -> HaloOrbit:
    return differential_correct(richardson_guess(az_km, coeffs), coeffs.mu, az_km=az_km, **kwargs)


def _draw_truth(job):
    orbit_id, seed_seq, az_lo, az_hi, coeffs, n_samples, max_resample = job
    rng = np.random.default_rng(seed_seq)
    failures = 0
    while True:
        az_km = float(rng.uniform(az_lo, az_hi))
        try:
            orbit = correct_halo(az_km, coeffs, n_samples=n_samples)
            break
        except (ConvergenceError, IntegrationError, SingularityError) as exc:
            failures += 1
            log.warning("orbit %d: Az=%.1f km failed (%s); resampling", orbit_id, az_km, exc)
            if failures > max_resample:
                raise
    idx = int(rng.integers(n_samples))  # index over [0, T): the endpoint repeats t = 0
    point = TruthPoint(position=orbit.trajectory.states[idx, :3].copy(),
                       true_t=float(orbit.trajectory.times[idx]),
                       true_az_km=az_km, orbit_id=orbit_id)
    return point, orbit, failures


@dataclass
class TruthSample:
    points: list
    orbits: list
    resampled: int


def sample_truth_points(n: int, seed: int, az_range_km=(100.0, 1.0e6),
                        config: SystemConfig | None = None, n_samples: int = 1000,
                        workers: int = 1, max_resample: int = 20) -> TruthSample:
    """Draw ``n`` corrected halo orbits (Az uniform in the range) and one random point on each.

    Each draw gets its own child of ``SeedSequence(seed)`` so results do not
    depend on ``workers`` or completion order.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    az_lo, az_hi = (float(v) for v in az_range_km)
    if not 0.0 < az_lo < az_hi:
        raise ValueError("az range must satisfy 0 < lo < hi")
    coeffs = build_coefficients(config or SystemConfig())
    children = np.random.SeedSequence(seed).spawn(n)
    jobs = [(i, children[i], az_lo, az_hi, coeffs, n_samples, max_resample) for i in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_draw_truth, jobs, chunksize=8))
    else:
        results = [_draw_truth(job) for job in jobs]
    resampled = sum(r[2] for r in results)
    if resampled:
        log.info("%d orbit draws resampled after corrector failure", resampled)
    return TruthSample(points=[r[0] for r in results], orbits=[r[1] for r in results],
                       resampled=resampled)


def sample_lp_points(n: int, seed: int, az_range_km, coeffs: LpCoefficients) -> list:
    """Pseudo-truth drawn from the series itself (isolates the inversion from model error)."""
    rng = np.random.default_rng(seed)
    points = []
    for i in range(n):
        az_km = float(rng.uniform(*az_range_km))
        t = float(rng.uniform(0.0, lp_period(coeffs.az_nd(az_km), coeffs)))
        pos = eval_lp(t, coeffs.az_nd(az_km), coeffs)
        points.append(TruthPoint(position=pos, true_t=t, true_az_km=az_km, orbit_id=i))
    return points


CATALOG_COLUMNS = ("orbit_id", "az_km", "x0", "vy0", "z0", "half_period")


def write_catalog(orbits, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CATALOG_COLUMNS)
        for i, orbit in enumerate(orbits):
            s = orbit.initial_state
            writer.writerow([i, repr(orbit.az_km), repr(float(s[0])), repr(float(s[4])),
                             repr(float(s[2])), repr(orbit.half_period)])
    return path


def write_trajectory(orbit: HaloOrbit, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("t", "x", "y", "z", "vx", "vy", "vz"))
        for t, s in zip(orbit.trajectory.times, orbit.trajectory.states):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in s])
    return path
