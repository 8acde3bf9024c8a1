import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halotrace.cr3bp import SystemConfig
from halotrace.halo import correct_halo
from halotrace.cubic import real_cubic_roots
from halotrace.inverse import (
    UNSOLVED,
    Disposition,
    NoTimeSolution,
    SolverSettings,
    adjust_time,
    estimate_half_period,
    method1,
    method2,
    method3,
    position_error_norm,
    query_from_km,
    refine_range,
    solve_time,
    time_candidates,
    trace,
    x_of,
)
from halotrace.lp_series import build_coefficients, eval_lp, lp_period

SE = build_coefficients(SystemConfig())
DEFAULT = SolverSettings()


def lp_query(t, az_km):
    return eval_lp(t, SE.az_nd(az_km), SE)


# --- cubic ---------------------------------------------------------------------------

def test_cubic_against_companion_matrix():
    rng = np.random.default_rng(0)
    coef = rng.normal(size=(2000, 4))
    ours = real_cubic_roots(*coef.T)
    for row, roots in zip(coef, ours):
        ref = np.roots(row)
        ref = np.sort(ref[np.abs(ref.imag) < 1e-7].real)
        got = roots[np.isfinite(roots)]
        assert len(got) == len(ref)
        np.testing.assert_allclose(got, ref, rtol=1e-6, atol=1e-8)


def test_cubic_known_roots_and_degenerate_rows():
    r = real_cubic_roots([1.0, 0.0, 0.0], [-6.0, 1.0, 0.0], [11.0, -3.0, 2.0], [-6.0, 2.0, -4.0])
    np.testing.assert_allclose(r[0], [1.0, 2.0, 3.0], atol=1e-12)
    np.testing.assert_allclose(r[1, :2], [1.0, 2.0], atol=1e-12)  # quadratic fallback
    assert np.isnan(r[1, 2])
    assert r[2, 0] == 2.0 and np.all(np.isnan(r[2, 1:]))  # linear fallback


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_cubic_roots_from_factored_form(roots):
    roots = np.sort(roots)
    coef = np.poly(roots)
    got = real_cubic_roots(*coef)[0]
    got = got[np.isfinite(got)]
    # every returned value is a root and every true root is near a returned value
    p = np.polyval(coef, got)
    assert np.all(np.abs(p) <= 1e-8 * (1 + np.abs(coef).sum() * (1 + np.abs(got)) ** 3))
    for r in roots:
        assert np.min(np.abs(got - r)) < 1e-4 * (1 + abs(r))


# --- time inversion ---------------------------------------------------------------------

@pytest.mark.parametrize("az_km", [100.0, 1e4, 1e5, 5e5, 1e6])
def test_solve_time_roundtrip_grid(az_km):
    az = SE.az_nd(az_km)
    half = 0.5 * lp_period(az, SE)
    for t_star in np.linspace(0.02, 0.98, 25) * half:
        z1 = eval_lp(t_star, az, SE)[2]
        ts = solve_time(z1, az, SE)
        assert ts == sorted(ts)
        assert all(0.0 <= t <= half + 1e-12 for t in ts)
        assert min(abs(t - t_star) for t in ts) < 1e-10


def test_z_maximum_gives_root_at_zero():
    az = SE.az_nd(1e5)
    zmax = eval_lp(0.0, az, SE)[2]
    ts = solve_time(zmax, az, SE)
    assert len(ts) == 1 and ts[0] < 1e-6


def test_unreachable_z_raises():
    az = SE.az_nd(1e5)
    with pytest.raises(NoTimeSolution):
        solve_time(1.0, az, SE)
    assert np.all(np.isnan(time_candidates(1.0, [az], SE)))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.02, 0.98), st.floats(1e3, 1e6))
def test_x_of_roundtrip(frac, az_km):
    az = SE.az_nd(az_km)
    t_star = frac * 0.5 * lp_period(az, SE)
    x1, _, z1 = eval_lp(t_star, az, SE)
    ts = solve_time(z1, az, SE)
    best = min(ts, key=lambda t: abs(t - t_star))
    assert abs(x_of(z1, az, SE, best) - x1) < 1e-10
    assert len(x_of(z1, az, SE)) == len(ts)


@given(st.floats(0.0, 3.0), st.floats(1e3, 1e6))
def test_x_of_even_about_zero_and_half_period(t, az_km):
    az = SE.az_nd(az_km)
    T = lp_period(az, SE)
    assert x_of(0.0, az, SE, t) == pytest.approx(x_of(0.0, az, SE, -t), abs=1e-15)
    assert x_of(0.0, az, SE, 0.5 * T + t) == pytest.approx(x_of(0.0, az, SE, 0.5 * T - t), abs=1e-14)


def test_x_mismatch_on_true_orbit_peaks_mid_period():
    # |x1 - g| at the true amplitude for points of the corrected Az = 100,000 km orbit
    orbit = correct_halo(1e5, SE)
    az = SE.az_nd(1e5)
    ts, mismatch = [], []
    for t, s in zip(orbit.trajectory.times[:-1:10], orbit.trajectory.states[:-1:10]):
        g = x_of(s[2], az, SE)
        ts.append(t)
        mismatch.append(min(abs(s[0] - v) for v in g))
    ts, mismatch = np.array(ts), np.array(mismatch)
    mid = (ts > 1.3) & (ts < 1.7)
    ends = (ts < 0.6) | (ts > 2.5)
    assert mismatch[mid].min() > 1.5 * np.median(mismatch[ends])
    assert mismatch[mid].min() > 1e-7


# --- half period and time adjustment ----------------------------------------------------

def test_half_period_is_pi_over_omega_over_family():
    az = SE.az_nd(np.linspace(100.0, 1e6, 400))
    half = estimate_half_period(az, SE)
    np.testing.assert_allclose(half, 0.5 * lp_period(az, SE), atol=1e-8)
    # default bracket pi/2 +/- 0.5 already contains every root
    assert np.all(np.abs(half - math.pi / 2) < 0.5)


def test_half_period_bracket_failure():
    with pytest.raises(ValueError):
        estimate_half_period(SE.az_nd(1e5), SE, guess=0.6, width=0.1)


def test_adjust_time_examples():
    assert adjust_time(0.3, -0.01, 1.55) == 0.3
    assert adjust_time(0.3, 0.01, 1.55) == pytest.approx(2.8)
    assert adjust_time(0.3, 0.0, 1.55) == 0.3


@given(st.floats(0.52, 0.98), st.floats(1e4, 1e6))
def test_second_half_roundtrip(frac, az_km):
    az = SE.az_nd(az_km)
    T = lp_period(az, SE)
    t_star = frac * T
    _, y1, z1 = eval_lp(t_star, az, SE)
    assert y1 > 0.0
    half = estimate_half_period(az, SE)
    ts = [adjust_time(t, y1, half) for t in solve_time(z1, az, SE)]
    assert min(abs(t - t_star) for t in ts) < 1e-9


# --- range refinement and norms -------------------------------------------------------

def test_refine_range_halves_with_shrink_two():
    s = SolverSettings(shrink_factor=2.0)
    lo, hi = refine_range(5e5, (3e5, 7e5), 0, s)
    assert (lo, hi) == (4e5, 6e5)


def test_refine_range_clips_at_bounds():
    lo, hi = refine_range(150.0, (100.0, 1e6), 0, DEFAULT)
    assert lo == 100.0 and hi == pytest.approx(150.0 + 0.5 * (1e6 - 100.0) / 10.0)
    lo, hi = refine_range(1e6, (100.0, 1e6), 0, DEFAULT)
    assert hi == 1e6


def test_refinement_contracts_on_true_amplitude():
    s = DEFAULT
    rng = (s.az_lo_km, s.az_hi_km)
    target = 123456.789
    for p in range(s.max_passes):
        grid = np.linspace(*rng, s.grid_points_per_pass)
        best = grid[np.argmin(np.abs(grid - target))]
        spacing = grid[1] - grid[0]
        assert abs(best - target) <= 0.5 * spacing + 1e-9
        rng = refine_range(best, rng, p, s)
    assert abs(best - target) <= (s.az_hi_km - s.az_lo_km) / (s.grid_points_per_pass - 1) \
        * s.shrink_factor ** -(s.max_passes - 1)


def test_position_error_norm():
    assert position_error_norm((1, 2, 3), (1, 2, 3)) == 0.0
    assert position_error_norm((0, 0, 0), (3, 4, 0)) == 5.0


def test_query_from_km():
    np.testing.assert_allclose(query_from_km((SE.length_unit_km, 0.0, 0.0), SE), (1.0, 0.0, 0.0))


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(az_lo_km=10.0, az_hi_km=5.0)
    with pytest.raises(ValueError):
        SolverSettings(tol_x=0.0)
    with pytest.raises(ValueError):
        SolverSettings(shrink_factor=1.0)


# --- methods -------------------------------------------------------------------------------

@pytest.mark.parametrize("t_star,az_km", [(0.4, 5e4), (0.9, 2e5), (2.5, 1.2e5), (0.2, 8e5)])
def test_method1_on_series_points(t_star, az_km):
    sol = method1(lp_query(t_star, az_km), DEFAULT, SE)
    assert sol.disposition == Disposition.METHOD1_ACCEPTED
    assert sol.objective <= 1e-7
    # the x-only objective is satisfied; the recovered orbit passes close to the query
    assert sol.error_norm < 1e-3


def test_true_amplitude_zeroes_the_method1_objective():
    for t_star, az_km in [(0.4, 5e4), (0.9, 2e5), (2.5, 1.2e5)]:
        x1, _, z1 = lp_query(t_star, az_km)
        g = x_of(z1, SE.az_nd(az_km), SE)
        assert min(abs(x1 - v) for v in g) < 1e-12


def test_solution_records_are_consistent():
    q = lp_query(2.2, 7e4)
    tr = trace(q, DEFAULT, SE)
    for sol in (tr.method1, tr.method2, tr.method3):
        if not sol.recovered:
            continue
        recon = eval_lp(sol.t, SE.az_nd(sol.az_km), SE)
        np.testing.assert_allclose(recon - q, sol.per_coordinate_errors, atol=1e-15)
        assert sol.error_norm == pytest.approx(np.linalg.norm(sol.per_coordinate_errors), rel=1e-12)
        T = 2 * estimate_half_period(SE.az_nd(sol.az_km), SE)
        assert 0.0 <= sol.t <= T + 1e-9
        assert (sol.t <= T / 2 + 1e-12) == (q[1] <= 0.0)


def test_method2_refines_a_far_method1_answer():
    # a query whose Method 1 answer misses by more than the trigger
    q = lp_query(1.45, 3e5)
    first = method1(q, DEFAULT, SE)
    second = method2(q, DEFAULT, SE, first=first)
    if first.error_norm > DEFAULT.tol_norm_trigger:
        assert second.disposition in (Disposition.METHOD2_REFINED, Disposition.DISCARDED)
    if second.disposition == Disposition.METHOD2_REFINED:
        assert second.error_norm <= DEFAULT.tol_norm_accept
        assert second.error_norm <= first.error_norm


def test_method2_keeps_close_method1_answer():
    q = lp_query(0.4, 5e4)
    first = method1(q, DEFAULT, SE)
    assert first.error_norm <= DEFAULT.tol_norm_trigger
    assert method2(q, DEFAULT, SE) == first


def test_unreachable_query_is_unsolved_everywhere():
    q = (SE.offset, 0.0, 0.5)
    tr = trace(q, DEFAULT, SE)
    assert tr.method1 == UNSOLVED and tr.method2 == UNSOLVED and tr.method3 == UNSOLVED


def test_non_finite_query_rejected():
    with pytest.raises(ValueError):
        method1((np.nan, 0.0, 0.0), DEFAULT, SE)


@pytest.fixture(scope="module")
def batch():
    rng = np.random.default_rng(42)
    qs = []
    for _ in range(60):
        az = rng.uniform(1e3, 1e6)
        t = rng.uniform(0.0, lp_period(SE.az_nd(az), SE))
        # perturb off the series so that some points fail Method 1
        qs.append(lp_query(t, az) + rng.normal(scale=2e-5, size=3))
    return qs, [trace(q, DEFAULT, SE) for q in qs]


def test_method_invariants(batch):
    qs, traces = batch
    m3 = method3(qs[:10], DEFAULT, SE)
    assert m3 == [tr.method3 for tr in traces[:10]]
    for tr in traces:
        if tr.method2.accepted:
            assert tr.method3 == tr.method2
        if tr.method3.disposition == Disposition.METHOD2_UNIQUE:
            assert tr.method1.disposition == Disposition.UNSOLVED
            assert tr.method3.error_norm <= DEFAULT.tol_norm_accept
        if tr.method2.disposition == Disposition.METHOD2_REFINED:
            assert tr.method2.error_norm <= DEFAULT.tol_norm_accept <= tr.method1.error_norm
        if tr.method2.disposition == Disposition.DISCARDED:
            assert tr.method1.error_norm > DEFAULT.tol_norm_trigger
        assert tr.method1.accepted == (tr.method1.disposition == Disposition.METHOD1_ACCEPTED)
    assert sum(tr.method3.accepted for tr in traces) >= sum(tr.method2.accepted for tr in traces)


def test_solvers_are_deterministic(batch):
    qs, traces = batch
    for q, tr in list(zip(qs, traces))[:8]:
        assert trace(q, DEFAULT, SE) == tr
