"""Instability index from the critical points of f0.

For ``k != 0`` the number of growing modes is ``N = N+ - N-``, where ``N+``
(``N-``) counts minima (maxima) ``s`` of ``f0`` with negative *Penrose value*
``1 - pv(s) / k^2``.  At ``k = 0`` a single real root exists iff
``int v phi dv > 0``.  The two-stream helpers below evaluate the sharp
valley criterion and the two sufficient conditions built from level widths
and peak shapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmbeddedMode, GeometryError, InvalidInput, NumericalFailure
from .profiles import CriticalPoint, VelocityProfile, critical_points, level_widths, moment
from .quadrature import pv_cauchy

EMBEDDED_TOL = 1e-9
GEOMETRY_TOL = 1e-8


@dataclass(frozen=True)
class PointValue:
    cp: CriticalPoint
    penrose_value: float
    counts: bool


@dataclass(frozen=True)
class IndexReport:
    k: float
    points: tuple[PointValue, ...]
    n_plus: int
    n_minus: int

    @property
    def n(self) -> int:
        return self.n_plus - self.n_minus

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "n": self.n,
            "points": [
                {"s": pv.cp.s, "slope": pv.cp.slope, "kind": pv.cp.kind,
                 "penrose_value": pv.penrose_value, "counts": pv.counts}
                for pv in self.points
            ],
        }


@dataclass(frozen=True)
class K0Result:
    unstable: bool
    root: Optional[complex]


@dataclass(frozen=True)
class TwoStreamGeometry:
    a: float
    c: float
    b: float
    M: float


def _oriented(p: VelocityProfile, k: float) -> tuple[VelocityProfile, float, int]:
    """Map ``k < 0`` onto ``|k|`` with the mirrored profile ``f0(-v)``."""
    if k == 0:
        raise InvalidInput("k must be nonzero (use index_at_k0)", "k")
    if k > 0:
        return p, k, 1
    key = ("mirrored",)
    q = p.cache.get(key)
    if q is None:
        q = p.mirrored()
        p.cache.put(key, q)
    return q, -k, -1


def penrose_value(p: VelocityProfile, k: float, s: float) -> float:
    """``1 - pv(s)/k^2`` at a zero ``s`` of phi.

    Values with magnitude below ``EMBEDDED_TOL`` signal a root on the
    imaginary axis; :func:`instability_index` refuses to count those.
    """
    if k == 0:
        raise InvalidInput("penrose_value: k must be nonzero", "k")
    if abs(float(p.phi(np.array(float(s))))) > 1e-8 * p.max_abs_phi:
        raise InvalidInput(f"penrose_value: s={s!r} is not a zero of phi", "s")
    return 1.0 - pv_cauchy(p, s) / (k * k)


def instability_index(p: VelocityProfile, k: float) -> IndexReport:
    """Number of dispersion roots with ``Re lam > 0`` at wave number ``k``."""
    q, kk, sign = _oriented(p, k)
    points = []
    n_plus = n_minus = 0
    bad_s, bad_v = [], []
    for cp in critical_points(q):
        val = penrose_value(q, kk, cp.s)
        if abs(val) < EMBEDDED_TOL:
            bad_s.append(sign * cp.s)
            bad_v.append(val)
        counts = val < 0
        if counts and cp.slope > 0:
            n_plus += 1
        elif counts:
            n_minus += 1
        points.append(PointValue(CriticalPoint(sign * cp.s, cp.slope), val, counts))
    if bad_s:
        raise EmbeddedMode(k, bad_s, bad_v)
    if sign < 0:
        points.reverse()
    report = IndexReport(float(k), tuple(points), n_plus, n_minus)
    if report.n < 0:
        raise NumericalFailure(f"instability_index: negative index {report.n} at k={k}")
    return report


def index_at_k0(p: VelocityProfile) -> K0Result:
    m = moment(p, "int_v_phi")
    if m > 0:
        return K0Result(True, complex(math.sqrt(m)))
    return K0Result(False, None)


def embedded_modes(p: VelocityProfile, k: float) -> list[float]:
    """Critical points whose Penrose value vanishes: candidate roots ``lam = -iks`` on the axis."""
    q, kk, sign = _oriented(p, k)
    out = [sign * cp.s for cp in critical_points(q) if abs(penrose_value(q, kk, cp.s)) < EMBEDDED_TOL]
    return sorted(out)


def penrose_threshold(p: VelocityProfile, s: float, k_lo: float = 1e-8, k_hi: float = 1e4) -> Optional[float]:
    """Wave number where the Penrose value at ``s`` changes sign, by bisection.

    The value ``1 - pv/k^2`` increases with ``k``, so the threshold exists
    only when ``pv(s) > 0``; otherwise ``None``.
    """
    f = lambda k: penrose_value(p, k, s)
    if f(k_lo) >= 0 or f(k_hi) <= 0:
        return None
    lo, hi = k_lo, k_hi
    while True:
        mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(f(lo)) < abs(f(hi)) else hi


# ---------------------------------------------------------------- two-stream model


def two_stream_geometry(p: VelocityProfile) -> TwoStreamGeometry:
    """Read off (a, c, b) from a profile with exactly maximum, minimum, maximum."""
    cps = critical_points(p)
    kinds = [cp.kind for cp in cps]
    if kinds != ["f0_max", "f0_min", "f0_max"]:
        raise GeometryError(f"two-stream geometry needs critical points (max, min, max), found {kinds}", "profile")
    a, c, b = (cp.s for cp in cps)
    M = min(float(p.f0(np.array(a))), float(p.f0(np.array(b))))
    return TwoStreamGeometry(a, c, b, M)


def _check_geometry(p: VelocityProfile, g: TwoStreamGeometry) -> None:
    actual = two_stream_geometry(p)
    scale = max(1.0, abs(g.a), abs(g.b))
    if any(abs(x - y) > GEOMETRY_TOL * scale for x, y in ((g.a, actual.a), (g.c, actual.c), (g.b, actual.b))):
        raise GeometryError(f"geometry {g} does not match the profile's critical points {actual}", "geometry")


def two_stream_criterion(p: VelocityProfile, g: TwoStreamGeometry, k: float) -> bool:
    """Sharp test for one growing mode: ``pv(c) > k^2``."""
    if k == 0:
        raise InvalidInput("two_stream_criterion: k must be nonzero", "k")
    _check_geometry(p, g)
    return pv_cauchy(p, g.c) > k * k


def lemma5_lhs(p: VelocityProfile, g: TwoStreamGeometry, xi: float, eta: float) -> float:
    if not (0 < xi < g.M):
        raise InvalidInput(f"xi={xi!r} outside (0, M={g.M:.12g})", "xi")
    if not (0 < eta < g.M):
        raise InvalidInput(f"eta={eta!r} outside (0, M={g.M:.12g})", "eta")
    cps = critical_points(p)
    a_lt, a_gt = level_widths(p, cps[0], xi)
    b_lt, b_gt = level_widths(p, cps[2], eta)
    if not (a_lt <= a_gt < g.c < b_lt <= b_gt):
        raise GeometryError(
            f"level sets cross the valley: a<={a_lt:.6g}, a>={a_gt:.6g}, c={g.c:.6g}, "
            f"b<={b_lt:.6g}, b>={b_gt:.6g}", "xi" if a_gt >= g.c else "eta")
    return ((a_gt - a_lt) * xi / ((g.c - a_gt) * (g.c - a_lt))
            + (b_gt - b_lt) * eta / ((b_lt - g.c) * (b_gt - g.c)))


def lemma5_check(p: VelocityProfile, g: TwoStreamGeometry, k: float, xi: float, eta: float) -> bool:
    """Sufficient condition for one growing mode from the peak widths at levels ``xi`` and ``eta``."""
    _check_geometry(p, g)
    return lemma5_lhs(p, g, xi, eta) > k * k


def lemma6_lhs(p: VelocityProfile, g: TwoStreamGeometry, sigma: float, tau: float) -> float:
    if not (0 < sigma < g.c - g.a):
        raise InvalidInput(f"sigma={sigma!r} outside (0, c-a={g.c - g.a:.12g})", "sigma")
    if not (0 < tau < g.b - g.c):
        raise InvalidInput(f"tau={tau!r} outside (0, b-c={g.b - g.c:.12g})", "tau")
    f0 = p.f0
    fa = float(f0(np.array(g.a + sigma)))
    fb = float(f0(np.array(g.b - tau)))
    return (sigma * fa / ((g.c - g.a - sigma) * (g.c - g.a))
            + tau * fb / ((g.b - g.c - tau) * (g.b - g.c)))


def lemma6_check(p: VelocityProfile, g: TwoStreamGeometry, k: float, sigma: float, tau: float) -> bool:
    """Sufficient condition for one growing mode from ``f0`` sampled inside the valley."""
    _check_geometry(p, g)
    return lemma6_lhs(p, g, sigma, tau) > k * k
