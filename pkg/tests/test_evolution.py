import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vstab import preset
from vstab.errors import InvalidInput
from vstab.evolution import (evolve_mode, fit_growth, free_field, mode_rhs, velocity_grid, volterra_mode,
                             volterra_solve)
from vstab.roots import find_roots


@pytest.fixture(scope="module")
def ts_rate(two_stream):
    return find_roots(two_stream, 0.2)[0].lam.real


def test_fit_exact_exponential():
    t = np.linspace(0, 20, 401)
    rate, r2 = fit_growth(t, np.exp(0.37 * t), (4.0, 20.0))
    assert abs(rate - 0.37) < 1e-12 and r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_perturbed_exponential():
    t = np.linspace(0, 40, 4001)
    rate, _ = fit_growth(t, np.exp(0.37 * t) * (1 + 0.01 * np.sin(5 * t)), (8.0, 40.0))
    assert abs(rate - 0.37) < 5e-3


def test_fit_constant():
    t = np.linspace(0, 1, 11)
    rate, r2 = fit_growth(t, np.full(11, 3.0), (0.0, 1.0))
    assert rate == pytest.approx(0.0, abs=1e-14) and r2 == 1.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(1e-3, 1e3))
def test_fit_recovers_rate(rate, amp):
    t = np.linspace(0, 10, 101)
    got, _ = fit_growth(t, amp * np.exp(rate * t), (2.0, 10.0))
    assert got == pytest.approx(rate, abs=1e-10)


def test_fit_rejects():
    t = np.linspace(0, 1, 11)
    with pytest.raises(InvalidInput):
        fit_growth(t, np.zeros(11), (0.0, 1.0))
    with pytest.raises(InvalidInput):
        fit_growth(t, np.ones(11), (0.5, 2.0))


def test_grid(two_stream):
    g = velocity_grid(two_stream, 256)
    lo, hi = two_stream.support
    assert g.v[0] < lo and g.v[-1] > hi and g.v.size == 256
    assert g.integrate(np.ones(256, complex)) == pytest.approx(g.v[-1] - g.v[0])
    with pytest.raises(InvalidInput):
        velocity_grid(two_stream, 128)


def test_even_data_no_initial_current(maxwellian):
    grid = velocity_grid(maxwellian)
    f = np.exp(-grid.v**2).astype(complex)
    _, dg = mode_rhs(1.0, grid, np.zeros_like(grid.v), f, 1.0 + 0j)
    assert abs(dg) < 1e-15


def test_two_stream_growth(two_stream, ts_rate):
    res = evolve_mode(two_stream, 0.2, T=80.0, dt=0.02)
    assert res.fitted_rate / ts_rate == pytest.approx(1.0, abs=0.02)
    assert res.fit_r2 > 0.999 and not res.inconclusive
    assert res.fit_window[0] == pytest.approx(0.2 * 80.0)
    assert res.charge_residual < 1e-12


def test_two_stream_random_smooth_data(two_stream, ts_rate):
    rng = np.random.default_rng(7)
    centres, widths = rng.uniform(-3, 3, 4), rng.uniform(0.5, 1.5, 4)
    coef = rng.normal(size=4) + 1j * rng.normal(size=4)
    f0 = lambda v: sum(c * np.exp(-((v - m) / w) ** 2) for c, m, w in zip(coef, centres, widths))
    res = evolve_mode(two_stream, 0.2, f0_hat=f0, T=80.0, dt=0.02)
    assert res.fitted_rate / ts_rate == pytest.approx(1.0, abs=0.02)


def test_maxwellian_damped(maxwellian):
    res = evolve_mode(maxwellian, 1.0, T=30.0, dt=0.005)
    assert res.fitted_rate <= 1e-3
    assert res.g_abs[-1] < 1e-3 * res.g_abs[0]


def test_time_step_order(two_stream):
    g = [evolve_mode(two_stream, 0.2, T=10.0, dt=dt).g[-1] for dt in (0.02, 0.01, 0.005)]
    ratio = abs(g[0] - g[1]) / abs(g[1] - g[2])
    assert 13 < ratio < 19


def test_velocity_refinement(two_stream):
    a = evolve_mode(two_stream, 0.2, T=60.0, dt=0.02, n_v=512).fitted_rate
    b = evolve_mode(two_stream, 0.2, T=60.0, dt=0.02, n_v=1024).fitted_rate
    assert abs(a - b) < 5e-3 * abs(a)


def test_preconditions(two_stream):
    with pytest.raises(InvalidInput):
        evolve_mode(two_stream, 0.2, T=10.0, dt=0.5)
    with pytest.raises(InvalidInput):
        evolve_mode(two_stream, 0.2, T=5000.0, dt=0.02, n_v=256)
    with pytest.raises(InvalidInput):
        evolve_mode(two_stream, 0.0, T=1.0, dt=0.01)
    with pytest.raises(InvalidInput):
        evolve_mode(two_stream, 0.2, f0_hat=np.ones(3), T=1.0, dt=0.01)


def test_overflow_stops_early(two_stream):
    res = evolve_mode(two_stream, 0.2, f0_hat=lambda v: 1e240 * np.exp(-v * v), T=200.0, dt=0.02)
    assert res.stopped_early and np.all(np.isfinite(res.g_abs))


def test_volterra_zero_kernel():
    e0 = np.exp(-np.linspace(0, 1, 101)) * (1 + 2j)
    res = volterra_solve(np.zeros(101), e0, 0.01)
    assert np.array_equal(res.g, e0) and res.converged


def test_volterra_constant_kernel():
    # g = 1 - int_0^t s g(t - s) ds has solution cos t
    dt = 1e-3
    t = dt * np.arange(3001)
    res = volterra_solve(t, np.ones_like(t), dt)
    assert np.max(np.abs(res.g - np.cos(t))) < 1e-6


def test_volterra_matches_evolution(two_stream):
    e = evolve_mode(two_stream, 0.2, T=5.0, dt=1e-3)
    v = volterra_mode(two_stream, 0.2, T=5.0, dt=1e-3)
    assert v.converged and not v.diverged
    assert np.max(np.abs(e.g - v.g)) < 1e-4


def test_volterra_maxwellian_discrepancy_small(maxwellian):
    # f0(0) != 0 here; the per-mode equation still describes the same dynamics
    e = evolve_mode(maxwellian, 1.0, T=3.0, dt=1e-3)
    v = volterra_mode(maxwellian, 1.0, T=3.0, dt=1e-3)
    assert np.max(np.abs(e.g - v.g)) < 1e-4


def test_volterra_long_run_diverges(two_stream):
    res = volterra_mode(two_stream, 0.2, T=200.0, dt=0.01, max_terms=40)
    assert res.diverged and not res.converged


def test_volterra_needs_f0(synthetic):
    with pytest.raises(InvalidInput):
        volterra_mode(synthetic, 1.0, T=1.0, dt=0.01)


def test_free_field_closed_form(maxwellian):
    grid = velocity_grid(maxwellian)
    t = np.array([0.0, 0.5, 2.0])
    k = 0.7
    assert np.allclose(free_field(k, grid)(t), 1j / k * math.sqrt(math.pi) * np.exp(-(k * t) ** 2 / 4), atol=1e-12)
