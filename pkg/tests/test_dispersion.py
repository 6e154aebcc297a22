import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import maxwellian_delta
from vstab import preset
from vstab.dispersion import (AXIS_TOL, delta, delta_direct, delta_k0, delta_prime, lemma4_threshold, phi_fun,
                              zone, zone_boundary, zone_contains)
from vstab.errors import InvalidInput

POINTS = [(1.0, 1 + 1j), (0.3, 0.2 - 0.7j), (2.0, 0.05 + 3j), (0.1, -0.4 + 0.1j), (-0.7, 0.5 + 0.5j)]


@pytest.mark.parametrize("k, lam", POINTS)
def test_delta_matches_faddeeva(maxwellian, k, lam):
    assert abs(delta(maxwellian, k, lam) - maxwellian_delta(k, lam)) < 1e-9


@pytest.mark.parametrize("name", ["two_stream", "bump_on_tail", "signed_synthetic"])
@pytest.mark.parametrize("k, lam", POINTS)
def test_two_paths_agree(name, k, lam):
    p = preset(name)
    assert abs(delta(p, k, lam) - delta_direct(p, k, lam)) < 1e-9


def test_delta_prime_vs_difference(two_stream):
    k, lam, h = 0.2, 0.3 + 0.2j, 1e-6
    fd = (delta(two_stream, k, lam + h) - delta(two_stream, k, lam - h)) / (2 * h)
    assert abs(delta_prime(two_stream, k, lam) - fd) < 1e-7 * abs(fd)


def test_axis_refused(maxwellian):
    with pytest.raises(InvalidInput):
        delta(maxwellian, 1.0, 0.5 * AXIS_TOL + 1j)
    with pytest.raises(InvalidInput):
        delta(maxwellian, 0.0, 1.0)


def test_conjugate_symmetry(bump):
    # phi real: conj Delta(k, lam) = Delta(-k, conj lam)
    k, lam = 0.4, 0.3 + 0.8j
    assert abs(delta(bump, -k, lam.conjugate()) - delta(bump, k, lam).conjugate()) < 1e-12


def test_imaginary_axis_reflection(bump):
    # Delta(k, -conj lam) = conj Delta(k, lam): roots pair up across the imaginary axis
    k, lam = 0.4, 0.3 + 0.8j
    assert abs(delta(bump, k, -lam.conjugate()) - delta(bump, k, lam).conjugate()) < 1e-12


def test_delta_k0(maxwellian, synthetic):
    assert delta_k0(maxwellian, 1.0) == pytest.approx(2.0)
    assert abs(delta_k0(synthetic, math.pi**0.25)) < 1e-13
    with pytest.raises(InvalidInput):
        delta_k0(maxwellian, 0.0)


@pytest.mark.parametrize("k, lam", [(0.5, 1 + 1j), (3.0, 0.2 - 1j)])
def test_phi_fun_order0(bump, k, lam):
    assert abs(phi_fun(bump, k, lam, 0) - (delta(bump, k, lam) - 1)) < 1e-11


@pytest.mark.parametrize("order", [1, 2])
def test_phi_fun_k_derivatives(bump, order):
    k, lam, h = 0.7, 1 + 1j, 1e-5
    fd = (phi_fun(bump, k + h, lam, order - 1) - phi_fun(bump, k - h, lam, order - 1)) / (2 * h)
    assert abs(phi_fun(bump, k, lam, order) - fd) < 1e-7


def test_phi_fun_order_check(bump):
    with pytest.raises(InvalidInput):
        phi_fun(bump, 1.0, 1 + 1j, 3)


def test_lemma1_decay(maxwellian):
    vals = [sum(abs(phi_fun(maxwellian, k, 1 + 1j, o)) for o in range(3)) * k**1.5 for k in (10, 20, 40, 80)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_zone_maxwellian(maxwellian):
    z = zone(maxwellian)
    assert z.c == pytest.approx(1.0, abs=1e-12)
    assert not zone_contains(z, math.sqrt(z.c))
    assert zone_contains(z, 2.0)
    assert not zone_contains(z, 0.1 + 5j)


def test_zone_boundary_shapes():
    from vstab.dispersion import ZoneSpec

    z = ZoneSpec(2.0)
    rc = math.sqrt(2.0)
    (s0, _), = zone_boundary(z, [0.0])
    assert s0 == pytest.approx(rc, rel=1e-15)
    (s, t), = zone_boundary(z, [100 * rc])
    assert s == pytest.approx(z.c / t, rel=1e-2)
    t = 0.05 * rc
    (s, _), = zone_boundary(z, [t])
    assert s - rc == pytest.approx(-t * t / (4 * rc), rel=1e-2)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(-1e4, 1e4))
def test_zone_boundary_on_curve(c, tau):
    from vstab.dispersion import ZoneSpec

    (s, t), = zone_boundary(ZoneSpec(c), [tau])
    assert s > 0
    assert s * s * (s * s + t * t) == pytest.approx(c * c, rel=1e-12)


def test_lemma4_threshold(maxwellian):
    assert lemma4_threshold(maxwellian) == pytest.approx((32 / math.pi) ** 0.25, abs=1e-10)


def test_lemma4_scaling():
    # k* is homogeneous of degree 1/2 in phi
    p1 = preset("maxwellian")
    assert lemma4_threshold(preset("maxwellian", n=2.0)) == pytest.approx(math.sqrt(2) * lemma4_threshold(p1), rel=1e-12)
    assert lemma4_threshold(preset("maxwellian", n=4.0)) == pytest.approx(2 * lemma4_threshold(p1), rel=1e-12)
