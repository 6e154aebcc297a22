"""Argument-principle root counting and localisation for the dispersion function.

Two contour families are supported:

* the z-plane half-disc bounded by ``[-R, R]`` and the upper semicircle of
  radius ``R``, on which ``w(z) = 1 - k^-2 int phi/(v - z) dv`` is tracked
  (boundary values on the real segment come from the Plemelj formulas);
* rectangles in the right half of the lambda-plane, on which ``Delta(k, .)``
  is tracked directly.  These drive quadrisection and Newton polishing.

The winding number is accumulated from principal-value phase increments
between samples, refining any step larger than ``MAX_PHASE_STEP``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dispersion import AXIS_TOL, delta, delta_prime, zone
from .errors import ContourError, EmbeddedMode, InvalidInput, NumericalFailure, RootOnContour
from .penrose import _oriented, instability_index
from .profiles import VelocityProfile, critical_points
from .quadrature import cauchy_integral, plemelj_boundary

log = logging.getLogger(__name__)

MAX_PHASE_STEP = math.pi / 4
MAX_DEPTH = 40
HALF_PLANE_DEPTH = 4
ZERO_TOL = 1e-8
BOX_MARGIN = 1e-4
CERT_SIDE = 1e-4
MIN_BOX = 1e-3
RESIDUAL_TOL = 1e-10
# Off-centre split points keep symmetric (e.g. purely real) roots off the new edges.
SPLIT_FRACTIONS = (0.4871, 0.4633, 0.5219)


@dataclass(frozen=True)
class ContourSpec:
    shape: str = "semicircle_halfplane"
    R: Optional[float] = None
    corners: Optional[tuple[complex, complex]] = None
    samples: int = 256

    def __post_init__(self):
        if self.shape not in ("semicircle_halfplane", "rectangle"):
            raise InvalidInput(f"unknown contour shape {self.shape!r}", "shape")
        if self.samples < 256:
            raise InvalidInput("contour needs at least 256 samples", "samples")
        if self.shape == "rectangle":
            if self.corners is None:
                raise InvalidInput("rectangle contour needs corners", "corners")
            a, b = (complex(c) for c in self.corners)
            if min(a.real, b.real) < BOX_MARGIN:
                raise InvalidInput(f"rectangle must stay Re lambda >= {BOX_MARGIN:g}", "corners")
            if a.real == b.real or a.imag == b.imag:
                raise InvalidInput("rectangle corners must span a box", "corners")


@dataclass(frozen=True)
class RootCertificate:
    lam: complex
    residual: float
    box_winding: int
    newton_iters: int
    near_marginal: bool = False

    def to_dict(self) -> dict:
        return {"re": self.lam.real, "im": self.lam.imag, "residual": self.residual,
                "box_winding": self.box_winding, "newton_iters": self.newton_iters,
                "near_marginal": self.near_marginal}


# ---------------------------------------------------------------- phase tracking


@dataclass
class _Path:
    """One piece of a closed contour: ``t in [0, 1] -> w``."""

    wfun: Callable[[float], complex]
    grid: np.ndarray
    # Optional certificate that Im w keeps a strict sign on [t0, t1].
    half_plane: Optional[Callable[[float, float], bool]] = None
    # Optional certificate that Im w(t) != 0 exactly, so a small |w| is not a root.
    nonzero: Optional[Callable[[float], bool]] = None
    cache: dict = field(default_factory=dict)

    def w(self, t: float) -> complex:
        val = self.cache.get(t)
        if val is None:
            val = complex(self.wfun(t))
            if not np.isfinite(val):
                raise NumericalFailure(f"contour: non-finite value at t={t}")
            if abs(val) < ZERO_TOL and not (self.nonzero is not None and self.nonzero(t)):
                raise RootOnContour(f"winding_number: |w| = {abs(val):.3e} < {ZERO_TOL:g} on the contour (t={t:.12g})")
            self.cache[t] = val
        return val


def _phase_change(path: _Path) -> float:
    total = 0.0
    ts = path.grid
    for t0, t1 in zip(ts[:-1], ts[1:]):
        stack = [(float(t0), float(t1), 0)]
        while stack:
            a, b, depth = stack.pop()
            wa, wb = path.w(a), path.w(b)
            step = math.atan2((wb / wa).imag, (wb / wa).real)
            chord_ok = abs(wb - wa) <= 0.75 * max(abs(wa), abs(wb))
            if abs(step) <= MAX_PHASE_STEP and chord_ok:
                total += step
                continue
            if path.half_plane is not None and depth >= HALF_PLANE_DEPTH and path.half_plane(a, b):
                # Im w has one strict sign on [a, b]: the principal arguments
                # cannot wrap, so their difference is the exact increment.
                total += math.atan2(wb.imag, wb.real) - math.atan2(wa.imag, wa.real)
                continue
            if depth >= MAX_DEPTH:
                raise ContourError(
                    f"winding_number: phase step {step:.3f} rad between t={a:.12g} and t={b:.12g} "
                    "persists after maximal refinement (contour too coarse or passes through a root)")
            m = 0.5 * (a + b)
            # push right half first so the left half is processed first
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
    return total


def _count(total: float) -> int:
    n = total / (2 * math.pi)
    r = round(n)
    if abs(n - r) > 1e-6:
        raise ContourError(f"winding_number: accumulated phase {total:.6f} is not a multiple of 2 pi")
    return int(r)


# ---------------------------------------------------------------- z-plane semicircle


def _real_axis_grid(lo: float, hi: float, R: float, n_in: int, n_out: int = 64) -> np.ndarray:
    inner = np.linspace(lo, hi, n_in)
    right = hi + (R - hi) * (np.geomspace(1.0, 1.0 + 1e3, n_out)[1:] - 1.0) / 1e3
    left = lo - (R + lo) * (np.geomspace(1.0, 1.0 + 1e3, n_out)[1:] - 1.0) / 1e3
    return np.concatenate([left[::-1], inner, right])


def _semicircle_winding(p: VelocityProfile, k: float, R: float, samples: int) -> tuple[int, float]:
    lo, hi = p.support
    k2 = k * k
    grid = _real_axis_grid(lo, hi, R, samples)
    crit = np.array([cp.s for cp in critical_points(p)])

    def w_real(s: float) -> complex:
        return plemelj_boundary(p, k, s, "plus")

    def half_plane(a: float, b: float) -> bool:
        if np.any((crit >= a) & (crit <= b)):
            return False
        fa, fb = float(p.phi(np.array(a))), float(p.phi(np.array(b)))
        return fa != 0.0 and np.sign(fa) == np.sign(fb)

    def nonzero(s: float) -> bool:
        return math.pi * abs(float(p.phi(np.array(s)))) / k2 > 0.0

    # The real segment is parametrised directly by s.
    real = _Path(w_real, grid, half_plane, nonzero)

    def w_arc(theta: float) -> complex:
        if theta <= 0.0:
            return w_real(R)
        if theta >= math.pi:
            return w_real(-R)
        z = R * complex(math.cos(theta), math.sin(theta))
        return 1.0 - cauchy_integral(p, z) / k2

    arc = _Path(w_arc, np.linspace(0.0, math.pi, samples))
    total = _phase_change(real) + _phase_change(arc)
    arc_dev = max(abs(arc.w(t) - 1.0) for t in arc.grid)
    return _count(total), arc_dev


def default_radius(p: VelocityProfile, k: float) -> float:
    from .profiles import moment

    lo, hi = p.support
    # |w - 1| <= int|psi| / dist on the arc; ask for at most 1/4.
    return max(1e3, 4.0 * moment(p, "int_absphi") / (k * k) + max(abs(lo), abs(hi)))


def winding_number(p: VelocityProfile, k: float, contour: Optional[ContourSpec] = None) -> int:
    """Number of zeros enclosed, by continuous argument tracking.

    For the semicircle, ``R`` is doubled (up to 8 times) until every arc
    sample satisfies ``|w - 1| < 1/2``.
    """
    contour = contour or ContourSpec()
    if k == 0:
        raise InvalidInput("winding_number: k must be nonzero", "k")
    if contour.shape == "rectangle":
        a, b = contour.corners
        return _box_winding(p, k, complex(a), complex(b), contour.samples)
    q, kk, _ = _oriented(p, k)
    R = contour.R or default_radius(q, kk)
    for _ in range(8):
        n, dev = _semicircle_winding(q, kk, R, contour.samples)
        if dev < 0.5:
            return n
        R *= 2
    raise ContourError(f"winding_number: |w-1| = {dev:.3f} >= 1/2 on the arc even at R={R:.3g}")


# ---------------------------------------------------------------- lambda-plane rectangles


def _box_winding(p: VelocityProfile, k: float, a: complex, b: complex, samples: int = 256) -> int:
    s0, s1 = sorted((a.real, b.real))
    t0, t1 = sorted((a.imag, b.imag))
    if s0 < AXIS_TOL:
        raise InvalidInput("box must lie in Re lambda > 0", "corners")
    corners = [complex(s0, t0), complex(s1, t0), complex(s1, t1), complex(s0, t1), complex(s0, t0)]
    per_edge = max(samples // 4, 64)
    total = 0.0
    for c0, c1 in zip(corners[:-1], corners[1:]):
        edge = _Path(lambda t, c0=c0, c1=c1: delta(p, k, c0 + t * (c1 - c0)), np.linspace(0.0, 1.0, per_edge + 1))
        total += _phase_change(edge)
    return _count(total)


def _newton(p: VelocityProfile, k: float, lam: complex, max_iter: int = 60,
            box: Optional[tuple[complex, complex]] = None) -> tuple[complex, float, int]:
    """Damped Newton iteration; with ``box`` the iterate may not leave it."""
    if box is not None:
        s0, s1 = sorted((box[0].real, box[1].real))
        t0, t1 = sorted((box[0].imag, box[1].imag))
        radius = math.hypot(s1 - s0, t1 - t0)
        inside = lambda z: s0 <= z.real <= s1 and t0 <= z.imag <= t1
    else:
        radius = max(1.0, abs(lam))
        inside = lambda z: True
    f = delta(p, k, lam)
    it = 0
    for it in range(1, max_iter + 1):
        d = delta_prime(p, k, lam)
        if d == 0:
            break
        step = f / d
        if abs(step) > radius:
            step *= radius / abs(step)
        t = 1.0
        while True:
            cand = lam - t * step
            if abs(cand.real) >= AXIS_TOL and inside(cand):
                fc = delta(p, k, cand)
                if abs(fc) < abs(f):
                    break
            if t < 1e-6:
                return lam, abs(f), it
            t *= 0.5
        lam, f = cand, fc
        if abs(f) < 1e-12 * (1 + abs(d)) or abs(t * step) < 1e-15 * (1 + abs(lam)):
            break
    return lam, abs(f), it


def _certify(p: VelocityProfile, k: float, lam: complex, res: float, iters: int, fallback: int) -> RootCertificate:
    h = 0.5 * CERT_SIDE
    if lam.real - h < BOX_MARGIN:
        return RootCertificate(lam, res, fallback, iters, near_marginal=True)
    wind = _box_winding(p, k, lam - complex(h, h), lam + complex(h, h))
    return RootCertificate(lam, res, wind, iters)


def default_region(p: VelocityProfile, k: float) -> tuple[complex, complex]:
    """A box holding every growing root: ``Re lam <= sqrt(c)`` and phase velocity within the support."""
    c = zone(p).c
    lo, hi = p.support
    ak = abs(k)
    taus = sorted((-k * (lo - 1.0), -k * (hi + 1.0)))
    return complex(BOX_MARGIN, taus[0] - ak), complex(math.sqrt(c) * 1.05 + BOX_MARGIN, taus[1] + ak)


def find_roots(p: VelocityProfile, k: float, region: Optional[tuple[complex, complex]] = None,
               samples: int = 256) -> list[RootCertificate]:
    """Locate and certify every root of ``Delta(k, .)`` inside a right-half-plane box."""
    if k == 0:
        raise InvalidInput("find_roots: k must be nonzero", "k")
    a, b = region or default_region(p, k)
    a, b = complex(a), complex(b)
    ContourSpec("rectangle", corners=(a, b), samples=samples)
    a0, b0 = complex(min(a.real, b.real), min(a.imag, b.imag)), complex(max(a.real, b.real), max(a.imag, b.imag))
    total = _box_winding(p, k, a, b, samples)
    found: list[RootCertificate] = []
    stack = [(a, b, total)]
    while stack:
        a, b, n = stack.pop()
        if n == 0:
            continue
        s0, s1 = sorted((a.real, b.real))
        t0, t1 = sorted((a.imag, b.imag))
        diam = math.hypot(s1 - s0, t1 - t0)
        if n == 1:
            lam, res, iters = _newton(p, k, complex(0.5 * (s0 + s1), 0.5 * (t0 + t1)), box=(a, b))
            inside = s0 <= lam.real <= s1 and t0 <= lam.imag <= t1
            if inside and res < RESIDUAL_TOL:
                if not any(abs(lam - r.lam) < 1e-9 for r in found):
                    found.append(_certify(p, k, lam, res, iters, 1))
                continue
        if diam < MIN_BOX:
            raise NumericalFailure(
                f"find_roots: box of diameter {diam:.2e} still holds winding {n}; possible multiple root")
        for frac in SPLIT_FRACTIONS:
            sm, tm = s0 + frac * (s1 - s0), t0 + (1 - frac) * (t1 - t0)
            quads = [(complex(s0, t0), complex(sm, tm)), (complex(sm, t0), complex(s1, tm)),
                     (complex(s0, tm), complex(sm, t1)), (complex(sm, tm), complex(s1, t1))]
            try:
                counts = [_box_winding(p, k, qa, qb, samples) for qa, qb in quads]
                break
            except RootOnContour:
                continue
        else:
            raise NumericalFailure("find_roots: every subdivision of a box runs through a root")
        if sum(counts) != n:
            raise NumericalFailure(f"find_roots: sub-box windings {counts} do not add up to {n}")
        stack.extend((qa, qb, c) for (qa, qb), c in zip(quads, counts))
    if sum(r.box_winding for r in found) != total:
        raise NumericalFailure(f"find_roots: certified {len(found)} roots but the region winds {total} times")
    if a0.real <= BOX_MARGIN:
        found.extend(_marginal_roots(p, k, a0, b0, found))
    found.sort(key=lambda r: (r.lam.real, r.lam.imag))
    return found


def _marginal_roots(p: VelocityProfile, k: float, a: complex, b: complex,
                    known: list[RootCertificate]) -> list[RootCertificate]:
    """Roots in the strip ``0 < Re lam < BOX_MARGIN`` that boxes cannot reach.

    Near a Penrose threshold a growing root leaves the imaginary axis at
    ``lam = -iks`` for a counting minimum ``s``; Newton is started just to
    the right of that point and kept inside the strip.
    """
    q, kk, sign = _oriented(p, k)
    t0, t1 = sorted((a.imag, b.imag))
    strip = (complex(AXIS_TOL, t0), complex(BOX_MARGIN, t1))
    out = []
    for pv in instability_index(p, k).points:
        if not (pv.counts and pv.cp.slope > 0):
            continue
        tau = -k * pv.cp.s
        if not t0 <= tau <= t1:
            continue
        lam, res, iters = _newton(p, k, complex(0.5 * BOX_MARGIN, tau), box=strip)
        if res < RESIDUAL_TOL and AXIS_TOL < lam.real < BOX_MARGIN:
            if not any(abs(lam - r.lam) < 1e-9 for r in known + out):
                out.append(RootCertificate(lam, res, 1, iters, near_marginal=True))
    return out


def growth_curve(p: VelocityProfile, k_grid: Sequence[float]) -> list[tuple[float, Optional[complex]]]:
    """Fastest-growing root for each ``k`` (``None`` when the index is zero).

    Newton is seeded from the previous wave number's root when available;
    the seed is only trusted for a single-root index, where the certified
    root is necessarily the maximum.
    """
    ks = [float(k) for k in k_grid]
    if any(k <= 0 for k in ks) or ks != sorted(ks):
        raise InvalidInput("growth_curve: k_grid must be positive and sorted", "k_grid")
    out: list[tuple[float, Optional[complex]]] = []
    prev: Optional[complex] = None
    for k in ks:
        try:
            n = instability_index(p, k).n
        except EmbeddedMode:
            out.append((k, None))
            prev = None
            continue
        if n == 0:
            out.append((k, None))
            prev = None
            continue
        best = None
        if prev is not None and n == 1:
            lam, res, _ = _newton(p, k, prev)
            if lam.real > AXIS_TOL and res < RESIDUAL_TOL:
                best = lam
        if best is None:
            roots = find_roots(p, k)
            if len(roots) < n:
                log.warning("growth_curve: k=%g index %d but %d roots certified in the default box", k, n, len(roots))
            best = max((r.lam for r in roots), key=lambda l: l.real, default=None)
        out.append((k, best))
        prev = best
    return out
