import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vstab import build_profile, preset
from vstab.dispersion import lemma4_threshold
from vstab.errors import EmbeddedMode, GeometryError, InvalidInput
from vstab.penrose import (TwoStreamGeometry, embedded_modes, index_at_k0, instability_index, lemma5_check,
                           lemma5_lhs, lemma6_check, lemma6_lhs, penrose_threshold, penrose_value,
                           two_stream_criterion, two_stream_geometry)
from vstab.profiles import critical_points
from vstab.quadrature import pv_cauchy


@pytest.fixture(scope="module")
def k_star(two_stream):
    return math.sqrt(pv_cauchy(two_stream, 0.0))


@pytest.mark.parametrize("k", [0.05, 0.7, 3.0])
def test_maxwellian_value(maxwellian, k):
    assert penrose_value(maxwellian, k, 0.0) == pytest.approx(1 + 2 / k**2, rel=1e-11)


def test_value_requires_zero_of_phi(maxwellian):
    with pytest.raises(InvalidInput):
        penrose_value(maxwellian, 1.0, 0.5)


def test_value_tends_to_one(two_stream):
    for cp in critical_points(two_stream):
        assert penrose_value(two_stream, 1e4, cp.s) == pytest.approx(1.0, abs=1e-8)


def test_value_monotone_in_k(two_stream):
    vals = [penrose_value(two_stream, k, 0.0) for k in np.geomspace(0.05, 5, 30)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("k", [0.05, 0.3, 1.0, 2.5, -0.4])
def test_maxwellian_stable(maxwellian, k):
    rep = instability_index(maxwellian, k)
    assert (rep.n_plus, rep.n_minus, rep.n) == (0, 0, 0)


def test_two_stream_index(two_stream):
    rep = instability_index(two_stream, 0.2)
    assert (rep.n_plus, rep.n_minus, rep.n) == (1, 0, 1)
    assert rep.to_dict()["n"] == 1
    assert [pv.counts for pv in rep.points] == [False, True, False]


def test_negative_k_mirrors(bump):
    for k in (0.1, 0.4, 1.0):
        a, b = instability_index(bump, k), instability_index(bump, -k)
        assert a.n == b.n
        assert [pv.cp.s for pv in a.points] == pytest.approx([pv.cp.s for pv in b.points], abs=1e-12)


def test_two_stream_above_lemma4(two_stream):
    ks = lemma4_threshold(two_stream)
    assert instability_index(two_stream, 1.01 * ks).n == 0


def test_threshold(two_stream, k_star):
    assert k_star == pytest.approx(0.6408768301244286, rel=1e-9)
    thr = penrose_threshold(two_stream, 0.0)
    assert thr == pytest.approx(k_star, abs=1e-12)
    assert instability_index(two_stream, k_star * (1 - 1e-3)).n == 1
    assert instability_index(two_stream, k_star * (1 + 1e-3)).n == 0
    assert penrose_threshold(preset("maxwellian"), 0.0) is None


def test_embedded_mode(two_stream, k_star):
    assert embedded_modes(two_stream, k_star) == [0.0]
    assert embedded_modes(two_stream, 0.3) == []
    assert embedded_modes(preset("maxwellian"), 0.3) == []
    with pytest.raises(EmbeddedMode):
        instability_index(two_stream, k_star)


def test_k0_branch():
    for name in ("maxwellian", "two_stream", "bump_on_tail"):
        assert index_at_k0(preset(name)) .unstable is False
    res = index_at_k0(preset("signed_synthetic"))
    assert res.unstable and abs(res.root - math.pi**0.25) < 1e-10


def test_k0_scaling():
    # phi -> alpha^2 phi scales the root by alpha
    base = index_at_k0(preset("signed_synthetic")).root
    scaled = index_at_k0(preset("signed_synthetic", a=2.0 * 9.0)).root
    assert scaled == pytest.approx(3 * base, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 0.6), st.floats(0.5, 1.5), st.floats(0.05, 3.0))
def test_single_peak_mixtures_stable(u, sigma, k):
    # |u| < sigma keeps two equal Gaussians unimodal
    p = build_profile({"kind": "gaussian_mixture",
                       "params": {"n": [0.5, 0.5], "u": [-u * sigma, u * sigma], "sigma": [sigma, sigma]}})
    if len(critical_points(p)) != 1:
        return
    assert instability_index(p, k).n == 0
    assert not index_at_k0(p).unstable


def test_geometry(two_stream):
    g = two_stream_geometry(two_stream)
    assert g.a < g.c < g.b
    assert g.M == pytest.approx(float(two_stream.f0(np.array(g.a))))
    with pytest.raises(GeometryError):
        two_stream_geometry(preset("maxwellian"))
    with pytest.raises(GeometryError):
        two_stream_criterion(two_stream, TwoStreamGeometry(g.a, 0.1, g.b, g.M), 0.2)


def test_criterion_matches_index(two_stream, k_star):
    g = two_stream_geometry(two_stream)
    for k in np.linspace(0.05, 1.5, 20):
        if abs(k - k_star) < 1e-6:
            continue
        assert two_stream_criterion(two_stream, g, k) == (instability_index(two_stream, k).n == 1)
    assert not two_stream_criterion(two_stream, g, 1e3)


def test_lemma5_examples(two_stream):
    g = two_stream_geometry(two_stream)
    assert lemma5_check(two_stream, g, 0.1, g.M / 2, g.M / 2)
    assert instability_index(two_stream, 0.1).n == 1
    xs = g.M * np.arange(1, 6) / 6
    assert not any(lemma5_check(two_stream, g, 5.0, x, e) for x in xs for e in xs)
    with pytest.raises(InvalidInput):
        lemma5_lhs(two_stream, g, g.M * 1.01, 0.1)


def test_lemma5_level_set_crossing(two_stream):
    g = two_stream_geometry(two_stream)
    # below f0(c) the level set around a swallows the valley
    low = 0.5 * float(two_stream.f0(np.array(g.c)))
    with pytest.raises(GeometryError):
        lemma5_lhs(two_stream, g, low, 0.1)


def test_lemma6_examples(two_stream):
    g = two_stream_geometry(two_stream)
    assert lemma6_check(two_stream, g, 0.1, 0.5, 0.5)
    assert lemma6_lhs(two_stream, g, 1e-9, 1e-9) < 1e-8
    assert not lemma6_check(two_stream, g, 0.1, 1e-9, 1e-9)
    with pytest.raises(InvalidInput):
        lemma6_lhs(two_stream, g, g.c - g.a, 0.5)


def test_lemma6_fails_when_valley_is_not_empty(two_stream):
    # The sufficient condition assumes f0 vanishes at the valley; here f0(c) > 0 and the
    # left side blows up as sigma -> c - a, so it can hold where no growing mode exists.
    g = two_stream_geometry(two_stream)
    assert float(two_stream.f0(np.array(g.c))) > 0.01
    sigma, tau = 0.999 * (g.c - g.a), 0.999 * (g.b - g.c)
    k = 2.0
    assert lemma6_check(two_stream, g, k, sigma, tau)
    assert instability_index(two_stream, k).n == 0
