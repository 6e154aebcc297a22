"""Time-domain oracle for a single Fourier mode of the linearised system.

Per wave number the perturbation obeys

    d f/dt = -ikv f + phi(v) g,      d g/dt = int v f dv,

with the field started Poisson-consistently, ``ik g + int f dv = 0``.  That
combination is conserved exactly when ``int phi dv = 0``, which gives a
cheap per-run diagnostic.  :func:`evolve_mode` integrates the system with
classical RK4 on a uniform velocity grid; :func:`volterra_mode` solves the
equivalent convolution equation for ``g`` alone,

    g(t) = g0(t) - int_0^t s F(ks) g(t - s) ds,    F(kappa) = int f0 e^{-i kappa v} dv,

by Neumann iteration.  The two share nothing but the velocity rule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidInput, NumericalFailure
from .profiles import VelocityProfile, moment

log = logging.getLogger(__name__)

MIN_NV = 256
DEFAULT_NV = 512
PAD_WIDTHS = 4.0
CFL = 0.1
TRANSIENT_FRACTION = 0.2
R2_ACCEPT = 0.999
OVERFLOW = 1e250
CHECK_EVERY = 100
CHARGE_TOL = 1e-10
NEUMANN_TOL = 1e-10

InitialData = Union[None, np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class VelocityGrid:
    v: np.ndarray
    weights: np.ndarray

    @property
    def dv(self) -> float:
        return float(self.v[1] - self.v[0])

    @property
    def v_max(self) -> float:
        return float(np.max(np.abs(self.v)))

    def integrate(self, values: np.ndarray) -> complex:
        return complex(values @ self.weights)


@dataclass
class ModeState:
    k: float
    v_grid: np.ndarray
    f_hat: np.ndarray
    g_hat: complex


@dataclass
class ModeEvolution:
    k: float
    times: np.ndarray
    g: np.ndarray
    g_abs: np.ndarray
    fitted_rate: float
    fit_window: tuple[float, float]
    fit_r2: float
    inconclusive: bool
    stopped_early: bool
    charge_residual: float
    dt: float
    n_v: int
    final_state: ModeState


@dataclass
class VolterraResult:
    times: np.ndarray
    g: np.ndarray
    terms: int
    converged: bool
    diverged: bool


def velocity_grid(p: VelocityProfile, n_v: int = DEFAULT_NV) -> VelocityGrid:
    """Uniform grid over the support padded by four peak widths.

    The width is ``int|phi| / (2 max|phi|)``, the scale over which ``f0``
    climbs to its peak at maximal slope.  The composite trapezoid rule is
    used throughout; for integrands that vanish at both ends it converges
    faster than any power of ``dv``.
    """
    if n_v < MIN_NV:
        raise InvalidInput(f"velocity grid needs n_v >= {MIN_NV} (got {n_v})", "n_v")
    lo, hi = p.support
    width = moment(p, "int_absphi") / (2.0 * p.max_abs_phi)
    v = np.linspace(lo - PAD_WIDTHS * width, hi + PAD_WIDTHS * width, n_v)
    w = np.full(n_v, v[1] - v[0])
    w[0] = w[-1] = 0.5 * (v[1] - v[0])
    return VelocityGrid(v, w)


def default_initial(v: np.ndarray) -> np.ndarray:
    return np.exp(-v * v).astype(complex)


def _initial(f0_hat: InitialData, grid: VelocityGrid) -> np.ndarray:
    if f0_hat is None:
        return default_initial(grid.v)
    if callable(f0_hat):
        out = np.asarray(f0_hat(grid.v), dtype=complex)
    else:
        out = np.asarray(f0_hat, dtype=complex)
    if out.shape != grid.v.shape:
        raise InvalidInput(f"initial data has shape {out.shape}, grid has {grid.v.shape}", "f0_hat")
    if not np.all(np.isfinite(out)):
        raise InvalidInput("initial data must be finite", "f0_hat")
    return out


def poisson_field(k: float, f_hat: np.ndarray, grid: VelocityGrid) -> complex:
    """Field mode consistent with the density mode: ``g = (i/k) int f dv``."""
    return 1j * grid.integrate(f_hat) / k


def mode_rhs(k: float, grid: VelocityGrid, phi_v: np.ndarray, f_hat: np.ndarray, g_hat: complex):
    df = -1j * k * grid.v * f_hat + phi_v * g_hat
    dg = grid.integrate(grid.v * f_hat)
    return df, dg


def fit_growth(times: Sequence[float], g_abs: Sequence[float], window: tuple[float, float]) -> tuple[float, float]:
    """Least-squares slope of ``log g_abs`` against ``t`` over ``window``; returns (rate, r2)."""
    t = np.asarray(times, dtype=float)
    a = np.asarray(g_abs, dtype=float)
    lo, hi = window
    if not (t.size and t[0] <= lo < hi <= t[-1]):
        raise InvalidInput(f"fit window {window} not inside [{t[0] if t.size else None}, "
                           f"{t[-1] if t.size else None}]", "window")
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 2:
        raise InvalidInput("fit window holds fewer than two samples", "window")
    if np.any(a[sel] <= 0) or not np.all(np.isfinite(a[sel])):
        raise InvalidInput("fit_growth: |g| must be positive and finite on the window", "g_abs")
    x, y = t[sel], np.log(a[sel])
    slope, icept = np.polyfit(x, y, 1)
    resid = y - (slope * x + icept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(y * y))) else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


def evolve_mode(
    p: VelocityProfile,
    k: float,
    f0_hat: InitialData = None,
    T: float = 60.0,
    dt: float = 1e-2,
    n_v: int = DEFAULT_NV,
    record_every: int = 1,
) -> ModeEvolution:
    """RK4 integration of one mode; the growth rate is fitted on the last 80% of the run."""
    if k == 0:
        raise InvalidInput("evolve_mode: k must be nonzero", "k")
    if not (T > 0 and dt > 0):
        raise InvalidInput("evolve_mode: T and dt must be positive", "T")
    grid = velocity_grid(p, n_v)
    dt_max = CFL / (abs(k) * grid.v_max)
    if dt > dt_max * (1 + 1e-12):
        raise InvalidInput(f"evolve_mode: dt={dt:g} exceeds {CFL:g}/(|k| v_max) = {dt_max:.4g}", "dt")
    recurrence = 2.0 * math.pi / (abs(k) * grid.dv)
    if T >= recurrence:
        raise InvalidInput(
            f"evolve_mode: T={T:g} reaches the grid recurrence time {recurrence:.4g}; raise n_v", "T")

    phi_v = p.phi(grid.v)
    phi_mass = abs(grid.integrate(phi_v.astype(complex)))
    f = _initial(f0_hat, grid)
    g = poisson_field(k, f, grid)
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * T:
        raise InvalidInput(f"evolve_mode: T={T:g} is not a multiple of dt={dt:g}", "dt")

    times = [0.0]
    gs = [g]
    scale = max(abs(g), abs(grid.integrate(f)), 1e-300)
    g_integral = 0.0
    worst_charge = 0.0
    stopped = False
    h = dt
    for n in range(1, steps + 1):
        k1f, k1g = mode_rhs(k, grid, phi_v, f, g)
        k2f, k2g = mode_rhs(k, grid, phi_v, f + 0.5 * h * k1f, g + 0.5 * h * k1g)
        k3f, k3g = mode_rhs(k, grid, phi_v, f + 0.5 * h * k2f, g + 0.5 * h * k2g)
        k4f, k4g = mode_rhs(k, grid, phi_v, f + h * k3f, g + h * k3g)
        g_prev = g
        f = f + (h / 6.0) * (k1f + 2 * k2f + 2 * k3f + k4f)
        g = g + (h / 6.0) * (k1g + 2 * k2g + 2 * k3g + k4g)
        g_integral += 0.5 * h * (abs(g_prev) + abs(g))
        if n % CHECK_EVERY == 0 or n == steps:
            # ik g + int f is conserved up to the grid's int phi
            scale = max(scale, abs(g), np.max(np.abs(f)))
            resid = abs(1j * k * g + grid.integrate(f))
            allowed = CHARGE_TOL * scale * max(1.0, abs(k)) * n + phi_mass * g_integral * 1.01
            worst_charge = max(worst_charge, resid / scale)
            if resid > allowed:
                raise NumericalFailure(
                    f"evolve_mode: charge identity broken at t={n * h:.6g} "
                    f"(residual {resid:.3e} > {allowed:.3e})")
        if n % record_every == 0 or n == steps:
            times.append(n * h)
            gs.append(g)
        if not np.isfinite(g) or abs(g) > OVERFLOW:
            stopped = True
            log.warning("evolve_mode: |g| exceeded %g at t=%g; stopping early", OVERFLOW, n * h)
            if not np.isfinite(g):
                times.pop()
                gs.pop()
            break

    t_arr = np.asarray(times)
    g_arr = np.asarray(gs, dtype=complex)
    g_abs = np.abs(g_arr)
    window = (TRANSIENT_FRACTION * t_arr[-1], float(t_arr[-1]))
    try:
        rate, r2 = fit_growth(t_arr, g_abs, window)
    except InvalidInput:
        rate, r2 = float("nan"), 0.0
    return ModeEvolution(
        k=float(k), times=t_arr, g=g_arr, g_abs=g_abs, fitted_rate=rate, fit_window=window,
        fit_r2=r2, inconclusive=not (r2 > R2_ACCEPT), stopped_early=stopped,
        charge_residual=worst_charge, dt=dt, n_v=n_v,
        final_state=ModeState(float(k), grid.v, f, complex(g)))


# ---------------------------------------------------------------- Volterra form


def free_field(k: float, grid: VelocityGrid, f0_hat: InitialData = None) -> Callable[[np.ndarray], np.ndarray]:
    """Field of the free-streaming solution, ``(i/k) int e^{-ikvt} f0_hat dv``."""
    f = _initial(f0_hat, grid)
    wf = grid.weights * f

    def e0(t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return 1j / k * (np.exp(-1j * k * np.outer(t, grid.v)) @ wf)

    return e0


def volterra_solve(kernel: np.ndarray, e0: np.ndarray, dt: float, max_terms: int = 200) -> VolterraResult:
    """Neumann series for ``g = e0 - K g`` with ``(Kg)_n = dt * trapz_j kernel_j g_{n-j}``.

    ``kernel`` holds ``s F(ks)`` at ``s = j dt``.  Iteration stops when the
    newest term is below ``NEUMANN_TOL`` times the partial sum (sup norms).
    """
    kernel = np.asarray(kernel, dtype=complex)
    e0 = np.asarray(e0, dtype=complex)
    n = e0.size
    if kernel.size != n:
        raise InvalidInput("kernel and e0 must share the time grid", "kernel")
    if max_terms < 1:
        raise InvalidInput("max_terms must be positive", "max_terms")
    size = 1 << (2 * n - 1).bit_length()
    kern_fft = np.fft.fft(kernel, size)
    end = kernel.copy()

    def apply(x: np.ndarray) -> np.ndarray:
        full = np.fft.ifft(kern_fft * np.fft.fft(x, size))[:n]
        # trapezoid: halve the j = n end point, kernel[0] x[n] vanishes since s = 0
        return dt * (full - 0.5 * end * x[0] - 0.5 * kernel[0] * x)

    total = e0.copy()
    term = e0.copy()
    converged = False
    used = 1
    for used in range(2, max_terms + 1):
        term = -apply(term)
        total = total + term
        if not (np.all(np.isfinite(total)) and np.all(np.isfinite(term))):
            break
        size_sum = float(np.max(np.abs(total)))
        if float(np.max(np.abs(term))) <= NEUMANN_TOL * max(size_sum, 1e-300):
            converged = True
            break
    times = dt * np.arange(n)
    return VolterraResult(times, total, used, converged, not converged)


def volterra_mode(
    p: VelocityProfile,
    k: float,
    e0_hat: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    T: float = 5.0,
    dt: float = 1e-3,
    max_terms: int = 200,
    n_v: int = DEFAULT_NV,
) -> VolterraResult:
    """Field mode from the convolution equation, on the grid ``t = 0, dt, ..., T``.

    ``e0_hat`` defaults to the free-streaming field of ``exp(-v^2)`` data.
    The kernel moment ``F(ks)`` uses the same velocity rule as
    :func:`evolve_mode`.
    """
    if k == 0:
        raise InvalidInput("volterra_mode: k must be nonzero", "k")
    if p.f0 is None:
        raise InvalidInput(f"volterra_mode needs f0; profile kind {p.kind!r} only defines phi", "profile")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * T:
        raise InvalidInput(f"volterra_mode: T={T:g} is not a positive multiple of dt={dt:g}", "dt")
    grid = velocity_grid(p, n_v)
    e0_hat = e0_hat or free_field(k, grid)
    t = dt * np.arange(steps + 1)
    e0 = np.asarray(e0_hat(t), dtype=complex).reshape(t.shape)
    wf = grid.weights * p.f0(grid.v)
    kernel = np.empty(t.size, dtype=complex)
    chunk = 2048
    for i in range(0, t.size, chunk):
        s = t[i:i + chunk]
        kernel[i:i + chunk] = s * (np.exp(-1j * k * np.outer(s, grid.v)) @ wf)
    res = volterra_solve(kernel, e0, dt, max_terms)
    if res.diverged:
        log.warning("volterra_mode: Neumann series not contracting on [0, %g] after %d terms", T, res.terms)
    return res
