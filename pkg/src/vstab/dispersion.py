"""The Landau dispersion function and its auxiliaries.

``delta(p, k, lam)`` evaluates ``1 + (1/ik) int phi(v) / (lam + ikv) dv``
off the imaginary axis.  The primary path rewrites it as
``w(z) = 1 - k^-2 int phi(v) / (v - z) dv`` at ``z = i lam / k`` and goes
through the Cauchy-integral engine; :func:`delta_direct` integrates the
original form and exists only as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import InvalidInput
from .profiles import VelocityProfile, moment
from .quadrature import cauchy_integral, integrate_line

# Evaluations closer than this to the continuous spectrum are refused.
AXIS_TOL = 1e-6


@dataclass(frozen=True)
class SpectralPoint:
    k: float
    lam: complex

    @property
    def sigma(self) -> float:
        return self.lam.real

    @property
    def tau(self) -> float:
        return self.lam.imag


@dataclass(frozen=True)
class ZoneSpec:
    c: float


def _check(k: float, lam: complex) -> complex:
    lam = complex(lam)
    if k == 0:
        raise InvalidInput("delta: k = 0; use delta_k0", "k")
    if abs(lam.real) < AXIS_TOL:
        raise InvalidInput(
            f"delta: |Re lambda| = {abs(lam.real):.3e} < {AXIS_TOL:g}; "
            "boundary values on the imaginary axis go through plemelj_boundary", "lambda")
    return lam


def _cauchy_tol(k: float) -> tuple[float, float]:
    # Delta - 1 = -I / k^2, so the integral must be resolved k^2 times finer.
    return 1e-12 * min(1.0, k * k), 1e-12


def delta(p: VelocityProfile, k: float, lam: complex) -> complex:
    """Landau dispersion function at wave number ``k`` and spectral parameter ``lam``."""
    lam = _check(k, lam)
    z = 1j * lam / k
    abs_tol, rel_tol = _cauchy_tol(k)
    return 1.0 - cauchy_integral(p, z, abs_tol, rel_tol) / (k * k)


def delta_prime(p: VelocityProfile, k: float, lam: complex) -> complex:
    """``d Delta / d lambda = -(i/k^3) int phi'(v) / (v - z) dv`` (integrated by parts)."""
    lam = _check(k, lam)
    z = 1j * lam / k
    abs_tol, rel_tol = _cauchy_tol(k)
    return -1j / k**3 * cauchy_integral(p, z, abs_tol * abs(k), rel_tol, density="phi1")


def _pole_breakpoints(p: VelocityProfile, k: float, lam: complex) -> list[float]:
    z = 1j * lam / k
    x, t = z.real, abs(z.imag)
    bps = list(p.breakpoints)
    lo, hi = p.support
    if lo < x < hi:
        bps.append(x)
        m = t
        while m < hi - lo:
            bps.extend((x - m, x + m))
            m *= 4.0
    return bps


def _direct(p: VelocityProfile, k: float, lam: complex, g, power: int, tol: float = 1e-14) -> complex:
    lo, hi = p.support
    vmax = max(abs(lo), abs(hi)) + 1.0
    tail = p.tail_mass * vmax**power / abs(lam.real)
    res = integrate_line(g, p.support, tol=tol, rel_tol=1e-12, breakpoints=_pole_breakpoints(p, k, lam),
                         tail_bound=tail)
    return complex(res.value)


def delta_direct(p: VelocityProfile, k: float, lam: complex) -> complex:
    """Cross-check path: quadrature of ``(1/ik) int phi / (lam + ikv) dv`` as written."""
    lam = _check(k, lam)
    val = _direct(p, k, lam, lambda v: p.phi(v) / (lam + 1j * k * v), 0, tol=1e-13 * min(1.0, abs(k)))
    return 1.0 + val / (1j * k)


def delta_k0(p: VelocityProfile, lam: complex) -> complex:
    """Continuous extension to ``k = 0``: ``1 - int v phi dv / lam^2``."""
    lam = complex(lam)
    if lam == 0:
        raise InvalidInput("delta_k0: lambda must be nonzero", "lambda")
    return 1.0 - moment(p, "int_v_phi") / lam**2


def phi_fun(p: VelocityProfile, k: float, lam: complex, order: int = 0) -> complex:
    """``Delta - 1`` and its first two k-derivatives, each by direct quadrature.

    order 0: ``-(1/lam) int v phi / (ikv + lam) dv``
    order 1: ``(i/lam) int v^2 phi / (ikv + lam)^2 dv``
    order 2: ``(2/lam) int v^3 phi / (ikv + lam)^3 dv``
    """
    lam = _check(k, lam)
    if order == 0:
        return -_direct(p, k, lam, lambda v: v * p.phi(v) / (1j * k * v + lam), 1) / lam
    if order == 1:
        return 1j * _direct(p, k, lam, lambda v: v**2 * p.phi(v) / (1j * k * v + lam) ** 2, 2) / lam
    if order == 2:
        return 2.0 * _direct(p, k, lam, lambda v: v**3 * p.phi(v) / (1j * k * v + lam) ** 3, 3) / lam
    raise InvalidInput(f"phi_fun: order must be 0, 1 or 2 (got {order})", "order")


# ---------------------------------------------------------------- spectrum-free zone


def zone(p: VelocityProfile) -> ZoneSpec:
    return ZoneSpec(moment(p, "int_absv_absphi"))


def zone_contains(z: ZoneSpec, lam: complex) -> bool:
    """True inside the guaranteed root-free region ``|Re lam| |lam| > c``."""
    lam = complex(lam)
    return abs(lam.real) * abs(lam) > z.c


def zone_boundary(z: ZoneSpec, tau_grid: Iterable[float]) -> list[tuple[float, float]]:
    """Right-half-plane branch of ``sigma^4 + sigma^2 tau^2 = c^2``, one point per ``tau``."""
    c = z.c
    out = []
    for tau in tau_grid:
        t2 = float(tau) ** 2
        # sigma^2 = (sqrt(tau^4 + 4c^2) - tau^2) / 2, rationalised to avoid cancellation at large tau
        s2 = 2.0 * c * c / (math.sqrt(t2 * t2 + 4.0 * c * c) + t2)
        out.append((math.sqrt(s2), float(tau)))
    return out


def lemma4_threshold(p: VelocityProfile) -> float:
    """Wave number beyond which no growing mode can exist: ``(8 max|phi'| int|phi|)^(1/4)``."""
    return (8.0 * moment(p, "max_abs_phi1") * moment(p, "int_absphi")) ** 0.25
