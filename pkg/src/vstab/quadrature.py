"""Certified integration over the real line.

The workhorse is :func:`integrate_line`, an adaptive Gauss-Kronrod (7/15)
integrator vectorised over panels.  On top of it sit the three singular
integrals needed by the dispersion function:

* :func:`cauchy_integral` - ``int phi(v) / (v - z) dv`` for ``Im z != 0``;
* :func:`pv_cauchy` - the principal value at a real point;
* :func:`plemelj_boundary` - boundary values ``w(s +- i0)``.

All routines are deterministic: the subdivision order depends only on the
integrand and the tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable

import numpy as np

from .errors import InvalidInput, QuadratureError

if TYPE_CHECKING:
    from .profiles import VelocityProfile

# QUADPACK 15-point Kronrod nodes/weights on [-1, 1] with the embedded 7-point Gauss rule.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (xgk[1], xgk[3], xgk[5], xgk[7]).
for _i, _w in zip((1, 3, 5, 7), _WG):
    GAUSS_W[_i] = _w
    GAUSS_W[14 - _i] = _w

MAX_PANELS = 2 ** 16
_EPS = np.finfo(float).eps

# Half-width of the principal-value subtraction window, and the radius inside
# which the difference quotient is replaced by its Taylor expansion.
PV_WINDOW = 1.0
PV_TAYLOR_RADIUS = 1e-6


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    abs_err: float
    subdivisions: int


def integrate_line(
    g: Callable[[np.ndarray], np.ndarray],
    support: tuple[float, float],
    tol: float = 1e-10,
    rel_tol: float = 0.0,
    breakpoints: Iterable[float] = (),
    tail_bound: float = 0.0,
    max_panels: int = MAX_PANELS,
    initial_panels: int = 4,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature of ``g`` over ``support``.

    ``g`` must accept a 2-D array of abscissae and return values of the same
    shape.  The run succeeds once the summed panel error estimates plus
    ``tail_bound`` (the caller's bound on the mass outside ``support``) drop
    below ``tol + rel_tol * |value|``.  Panels whose Kronrod/Gauss difference
    is already at rounding level are frozen and no longer count against the
    target, though their error still enters the reported estimate.
    """
    a, b = float(support[0]), float(support[1])
    if not (tol > 0 or rel_tol > 0):
        raise InvalidInput("integrate_line: tolerance must be positive", "tol")
    if not b > a:
        return QuadratureResult(0j, float(tail_bound), 0)

    cuts = sorted({a, b, *(float(x) for x in breakpoints if a < x < b)})
    edges = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        edges.append(np.linspace(lo, hi, initial_panels + 1)[:-1])
    left = np.concatenate(edges)
    right = np.append(left[1:], b)

    lo_all = np.empty(0)
    hi_all = np.empty(0)
    val_all = np.empty(0, dtype=complex)
    err_all = np.empty(0)
    frozen_all = np.empty(0, dtype=bool)
    l1_all = np.empty(0)

    while True:
        mid = 0.5 * (left + right)
        half = 0.5 * (right - left)
        x = mid[:, None] + half[:, None] * NODES[None, :]
        y = np.asarray(g(x), dtype=complex)
        if not np.all(np.isfinite(y)):
            bad = int(np.argmax(~np.all(np.isfinite(y), axis=1)))
            raise QuadratureError(
                "integrate_line: non-finite integrand value", (left[bad], right[bad]), math.inf
            )
        kron = half * (y @ KRONROD_W)
        gauss = half * (y @ GAUSS_W)
        err = np.abs(kron - gauss)
        # rounding level: cancellation inside g can cost digits relative to its peak
        scale = 2.0 * half * np.max(np.abs(y), axis=1)
        floor = 100.0 * _EPS * scale
        l1 = half * (np.abs(y) @ KRONROD_W)
        frozen = (err <= floor) | (half <= 8.0 * _EPS * np.maximum(np.abs(mid), 1.0))
        err = np.maximum(err, floor)

        lo_all = np.concatenate([lo_all, left])
        hi_all = np.concatenate([hi_all, right])
        val_all = np.concatenate([val_all, kron])
        err_all = np.concatenate([err_all, err])
        frozen_all = np.concatenate([frozen_all, frozen])
        l1_all = np.concatenate([l1_all, l1])

        order = np.argsort(lo_all, kind="stable")
        lo_all, hi_all = lo_all[order], hi_all[order]
        val_all, err_all, frozen_all = val_all[order], err_all[order], frozen_all[order]
        l1_all = l1_all[order]

        value = complex(np.sum(val_all))
        total_err = float(np.sum(err_all)) + tail_bound
        # no target below the rounding level of the integrand's L1 mass
        target = max(tol + rel_tol * abs(value), 50.0 * _EPS * float(np.sum(l1_all)))
        n = lo_all.size
        live = ~frozen_all
        # Frozen panels sit at rounding level and cannot improve; only the
        # resolvable part of the error has to meet the target.
        if total_err <= target or float(np.sum(err_all[live])) + tail_bound <= target:
            return QuadratureResult(value, total_err, n)
        if not np.any(live):
            return QuadratureResult(value, total_err, n)

        width = hi_all - lo_all
        local = target * width / (b - a)
        split = live & (err_all > 0.5 * local)
        if not np.any(split):
            split = np.zeros(n, dtype=bool)
            split[int(np.argmax(np.where(live, err_all, -1.0)))] = True
        if n + int(split.sum()) > max_panels:
            worst = int(np.argmax(err_all))
            raise QuadratureError(
                f"integrate_line: panel budget {max_panels} exhausted (error {total_err:.3e} > {target:.3e})",
                (lo_all[worst], hi_all[worst]),
                float(err_all[worst]),
            )
        keep = ~split
        pl, ph = lo_all[split], hi_all[split]
        pm = 0.5 * (pl + ph)
        left = np.concatenate([pl, pm])
        right = np.concatenate([pm, ph])
        lo_all, hi_all = lo_all[keep], hi_all[keep]
        val_all, err_all, frozen_all = val_all[keep], err_all[keep], frozen_all[keep]
        l1_all = l1_all[keep]


def _dist_to_complement(z: complex, lo: float, hi: float) -> float:
    """Distance from ``z`` to ``(-inf, lo] U [hi, inf)``."""
    x, y = z.real, abs(z.imag)
    d_hi = y if x >= hi else math.hypot(hi - x, y)
    d_lo = y if x <= lo else math.hypot(x - lo, y)
    return min(d_hi, d_lo)


def _density(p: VelocityProfile, density: str):
    if density == "phi":
        return p.phi, p.tail_mass
    if density == "phi1":
        return p.phi1, p.tail_mass1
    raise InvalidInput(f"unknown density {density!r}", "density")


def cauchy_quad(
    p: VelocityProfile,
    z: complex,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
    density: str = "phi",
) -> QuadratureResult:
    """``int rho(v)/(v - z) dv`` with ``rho`` = phi (or phi'), as a :class:`QuadratureResult`.

    When ``Re z`` lies inside the support the density value at ``Re z`` is
    subtracted and integrated in closed form, which keeps the integrand
    bounded however close ``z`` is to the real axis.
    """
    z = complex(z)
    if z.imag == 0.0:
        raise InvalidInput("cauchy_integral: z is real; use pv_cauchy", "z")
    rho, tail = _density(p, density)
    lo, hi = p.support
    x, t = z.real, abs(z.imag)
    # Near an end of the support the tail bound mass/dist is useless; integrate a
    # little of the tail explicitly so the remainder is at least unit distance away.
    if abs(x - lo) < 1.0:
        lo = min(lo, x) - 1.0
    if abs(hi - x) < 1.0:
        hi = max(hi, x) + 1.0
    tail_bound = tail / max(_dist_to_complement(z, lo, hi), 1e-300)
    bps = list(p.breakpoints)
    if lo < x < hi:
        r0 = float(rho(np.array(x)))

        def g(v):
            return (rho(v) - r0) / (v - z)

        log_term = r0 * (np.log(hi - z) - np.log(lo - z))
        bps.append(x)
        # Im g ~ t phi'(x)/(v - x) for t << |v - x|: cut geometrically out to the support scale
        m = t
        while m < hi - lo:
            bps.extend((x - m, x + m))
            m *= 4.0
    else:
        log_term = 0.0

        def g(v):
            return rho(v) / (v - z)

    res = integrate_line(g, (lo, hi), tol=abs_tol, rel_tol=rel_tol, breakpoints=bps, tail_bound=tail_bound)
    return QuadratureResult(res.value + log_term, res.abs_err, res.subdivisions)


def cauchy_integral(
    p: VelocityProfile,
    z: complex,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
    density: str = "phi",
) -> complex:
    """``int phi(v) / (v - z) dv`` for non-real ``z``; memoised per profile."""
    key = ("cauchy", complex(z), abs_tol, rel_tol, density)
    hit = p.cache.get(key)
    if hit is None:
        hit = cauchy_quad(p, z, abs_tol, rel_tol, density).value
        p.cache.put(key, hit)
    return hit


def pv_quad(p: VelocityProfile, s: float, abs_tol: float = 1e-10, rel_tol: float = 1e-10) -> QuadratureResult:
    s = float(s)
    lo, hi = p.support
    phi = p.phi
    f_s = float(phi(np.array(s)))
    d1 = float(p.phi1(np.array(s)))
    d2 = float(p.phi2(np.array(s)))

    def inner(v):
        d = v - s
        near = np.abs(d) < PV_TAYLOR_RADIUS
        safe = np.where(near, 1.0, d)
        out = (phi(v) - f_s) / safe
        return np.where(near, d1 + 0.5 * d2 * d, out)

    def outer(v):
        return phi(v) / (v - s)

    w_lo, w_hi = s - PV_WINDOW, s + PV_WINDOW
    bps = [x for x in p.breakpoints]
    # The subtracted constant integrates to phi(s) * ln|w_hi - s| / |w_lo - s| = 0 on a symmetric window.
    parts = [integrate_line(inner, (w_lo, w_hi), tol=abs_tol / 3, rel_tol=rel_tol, breakpoints=bps + [s])]
    if lo < w_lo:
        parts.append(integrate_line(outer, (lo, min(w_lo, hi)), tol=abs_tol / 3, rel_tol=rel_tol, breakpoints=bps))
    if hi > w_hi:
        parts.append(integrate_line(outer, (max(w_hi, lo), hi), tol=abs_tol / 3, rel_tol=rel_tol, breakpoints=bps))
    span_lo, span_hi = min(lo, w_lo), max(hi, w_hi)
    dist = max(min(s - span_lo, span_hi - s), PV_WINDOW)
    value = sum(r.value for r in parts).real
    err = sum(r.abs_err for r in parts) + p.tail_mass / dist
    return QuadratureResult(complex(value), err, sum(r.subdivisions for r in parts))


def pv_cauchy(p: VelocityProfile, s: float, abs_tol: float = 1e-10, rel_tol: float = 1e-10) -> float:
    """Principal value ``v.p. int phi(v) / (v - s) dv`` at real ``s``; memoised per profile."""
    key = ("pv", float(s), abs_tol, rel_tol)
    hit = p.cache.get(key)
    if hit is None:
        hit = pv_quad(p, s, abs_tol, rel_tol).value.real
        p.cache.put(key, hit)
    return hit


def plemelj_boundary(p: VelocityProfile, k: float, s: float, side: str = "plus") -> complex:
    """Boundary value ``w(s +- i0) = 1 - pv/k^2 -+ i pi phi(s)/k^2``."""
    if k == 0:
        raise InvalidInput("plemelj_boundary: k must be nonzero", "k")
    if side not in ("plus", "minus"):
        raise InvalidInput(f"plemelj_boundary: side must be 'plus' or 'minus', got {side!r}", "side")
    k2 = k * k
    re = 1.0 - pv_cauchy(p, s) / k2
    im = math.pi * float(p.phi(np.array(float(s)))) / k2
    return complex(re, -im if side == "plus" else im)
