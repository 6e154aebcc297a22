import math

import numpy as np
import pytest

from vstab import preset
from vstab.dispersion import delta, lemma4_threshold, zone, zone_contains
from vstab.errors import ContourError, InvalidInput, RootOnContour
from vstab.penrose import instability_index
from vstab.quadrature import cauchy_integral, plemelj_boundary, pv_cauchy
from vstab.roots import (ContourSpec, _count, _Path, _phase_change, default_radius, find_roots, growth_curve,
                         winding_number)


def test_winding_maxwellian(maxwellian):
    assert winding_number(maxwellian, 1.0, ContourSpec(R=1e3)) == 0


def test_winding_two_stream(two_stream):
    assert winding_number(two_stream, 0.2, ContourSpec(R=1e3)) == 1
    assert winding_number(two_stream, -0.2, ContourSpec(R=1e3)) == 1


@pytest.mark.parametrize("k", [0.05, 0.3, 1.5])
def test_winding_equals_index(bump, k):
    assert winding_number(bump, k) == instability_index(bump, k).n


def test_winding_stable_under_radius(two_stream):
    R = default_radius(two_stream, 0.3)
    assert winding_number(two_stream, 0.3, ContourSpec(R=R)) == winding_number(two_stream, 0.3, ContourSpec(R=2 * R))


def test_planted_zero(maxwellian):
    # (z - z0) w(z) winds once more than w around the half-disc holding z0
    k, R, z0 = 1.0, 50.0, 0.7 + 0.4j

    def w_real(s):
        return plemelj_boundary(maxwellian, k, s, "plus")

    def w_arc(th):
        z = R * complex(math.cos(th), math.sin(th))
        return 1 - cauchy_integral(maxwellian, z) / k**2

    grid = np.linspace(-R, R, 401)
    arc = np.linspace(0, math.pi, 257)[1:-1]
    plain = _phase_change(_Path(w_real, grid)) + _phase_change(_Path(
        lambda t: w_real(R) if t == 0 else (w_real(-R) if t == math.pi else w_arc(t)), np.linspace(0, math.pi, 257)))
    planted = _phase_change(_Path(lambda s: (s - z0) * w_real(s), grid)) + _phase_change(_Path(
        lambda t: (R - z0) * w_real(R) if t == 0 else ((-R - z0) * w_real(-R) if t == math.pi
                                                       else (R * complex(math.cos(t), math.sin(t)) - z0) * w_arc(t)),
        np.linspace(0, math.pi, 257)))
    assert _count(planted) == 1 + _count(plain)


def test_root_on_contour_detected():
    with pytest.raises(RootOnContour):
        _phase_change(_Path(lambda t: complex(t - 0.5, 0.0), np.linspace(0, 1, 5)))


def test_non_integer_phase():
    with pytest.raises(ContourError):
        _count(1.0)


def test_contour_spec_validation():
    with pytest.raises(InvalidInput):
        ContourSpec(shape="square")
    with pytest.raises(InvalidInput):
        ContourSpec(samples=100)
    with pytest.raises(InvalidInput):
        ContourSpec("rectangle", corners=(0 + 0j, 1 + 1j))
    with pytest.raises(InvalidInput):
        ContourSpec("rectangle")


def test_rectangle_winding(two_stream):
    spec = ContourSpec("rectangle", corners=(0.1 - 0.5j, 0.5 + 0.5j))
    assert winding_number(two_stream, 0.2, spec) == 1
    spec = ContourSpec("rectangle", corners=(0.3 - 0.5j, 0.5 + 0.5j))
    assert winding_number(two_stream, 0.2, spec) == 0


@pytest.fixture(scope="module")
def ts_roots(two_stream):
    return find_roots(two_stream, 0.2)


def test_two_stream_root(ts_roots, two_stream):
    assert len(ts_roots) == 1
    r = ts_roots[0]
    assert r.lam.real > 0 and abs(r.lam.imag) < 1e-9
    assert r.residual < 1e-10 and r.box_winding == 1 and not r.near_marginal
    assert abs(delta(two_stream, 0.2, r.lam)) < 1e-10
    assert r.to_dict()["re"] == r.lam.real


def test_roots_outside_zone(ts_roots, two_stream):
    z = zone(two_stream)
    for r in ts_roots:
        assert not zone_contains(z, r.lam)


def test_root_reflection(ts_roots, two_stream):
    for r in ts_roots:
        assert abs(delta(two_stream, 0.2, -r.lam.conjugate())) < 1e-8


def test_maxwellian_no_roots(maxwellian):
    assert find_roots(maxwellian, 0.5) == []
    assert find_roots(maxwellian, 1.0, (0.01 - 3j, 2 + 3j)) == []


def test_bump_root_is_travelling(bump):
    roots = find_roots(bump, 0.3)
    assert len(roots) == instability_index(bump, 0.3).n == 1
    # the wave rides the beam: phase velocity -Im(lam)/k sits near the positive-slope region
    assert 2.5 < -roots[0].lam.imag / 0.3 < 4.0


def test_growth_curve_threshold(two_stream):
    ks = math.sqrt(pv_cauchy(two_stream, 0.0))
    grid = [0.1, 0.3, 0.5, 0.6, ks * (1 - 1e-3), ks * (1 - 1e-5), ks * (1 + 1e-3), 1.0]
    out = growth_curve(two_stream, grid)
    rates = [None if lam is None else lam.real for _, lam in out]
    assert all(r is not None and r > 0 for r in rates[:6])
    assert rates[6] is None and rates[7] is None
    assert rates[5] < 1e-4 < rates[4] < rates[3]


def test_growth_curve_beyond_lemma4(bump):
    ks = lemma4_threshold(bump)
    assert growth_curve(bump, [1.01 * ks, 2 * ks]) == [(1.01 * ks, None), (2 * ks, None)]


def test_growth_curve_deterministic(two_stream):
    coarse = dict(growth_curve(two_stream, [0.1, 0.3, 0.5]))
    fine = dict(growth_curve(two_stream, [0.1, 0.2, 0.3, 0.4, 0.5]))
    for k in coarse:
        assert abs(coarse[k] - fine[k]) < 1e-8


def test_growth_curve_rejects_unsorted(two_stream):
    with pytest.raises(InvalidInput):
        growth_curve(two_stream, [0.3, 0.1])
    with pytest.raises(InvalidInput):
        growth_curve(two_stream, [0.0, 0.1])
