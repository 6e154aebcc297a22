"""Equilibrium velocity distributions and their derivatives.

A :class:`VelocityProfile` bundles ``f0`` and ``phi = f0'`` (with the
plasma-frequency normalisation folded in) together with ``phi'`` and
``phi''``, the support outside which ``|phi|`` is negligible and a bound on
the mass of ``|phi|`` that the support cuts off.  Everything else in the
package integrates against these evaluators.
"""

from __future__ import annotations

import json
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.optimize import brentq, minimize_scalar

from .errors import DegenerateCriticalPoint, InvalidInput, NumericalFailure
from .quadrature import integrate_line

KINDS = ("maxwellian", "two_stream", "bump_on_tail", "gaussian_mixture", "tabulated", "signed_synthetic")
GAUSSIAN_KINDS = ("maxwellian", "two_stream", "bump_on_tail", "gaussian_mixture")

TAIL_REL = 1e-14
ROOT_REL = 1e-12
DEGENERACY_REL = 1e-8
_SQRT2PI = math.sqrt(2.0 * math.pi)

Evaluator = Callable[[np.ndarray], np.ndarray]


class EvalCache:
    """Small thread-safe LRU memo used by the quadrature layer."""

    def __init__(self, maxsize: int = 200_000):
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.maxsize = maxsize

    def get(self, key):
        with self._lock:
            return self._data.get(key)

    def put(self, key, value) -> None:
        with self._lock:
            self._data[key] = value
            if len(self._data) > self.maxsize:
                self._data.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()


@dataclass(frozen=True)
class ProfileSpec:
    kind: str
    params: dict = field(default_factory=dict)
    table: Optional[Sequence[Sequence[float]]] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ProfileSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise InvalidInput("profile spec must be an object with a 'kind' field", "kind")
        extra = set(d) - {"kind", "params", "table"}
        if extra:
            raise InvalidInput(f"unknown profile fields: {sorted(extra)}", sorted(extra)[0])
        return cls(kind=d["kind"], params=dict(d.get("params") or {}), table=d.get("table"))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "params": dict(self.params)}
        if self.table is not None:
            out["table"] = [list(map(float, row)) for row in self.table]
        return out


@dataclass(frozen=True, eq=False)
class VelocityProfile:
    kind: str
    f0: Optional[Evaluator]
    phi: Evaluator
    phi1: Evaluator
    phi2: Evaluator
    support: tuple[float, float]
    tail_eps: float
    tail_mass: float
    tail_mass1: float
    max_abs_phi: float
    breakpoints: tuple[float, ...] = ()
    spec: Optional[ProfileSpec] = None
    cache: EvalCache = field(default_factory=EvalCache, repr=False, compare=False)

    def mirrored(self) -> "VelocityProfile":
        """Profile of ``f0(-v)``; used to map negative wave numbers onto positive ones."""
        f0 = self.f0
        phi, phi1, phi2 = self.phi, self.phi1, self.phi2
        lo, hi = self.support
        return VelocityProfile(
            kind=self.kind,
            f0=None if f0 is None else (lambda v: f0(-np.asarray(v))),
            phi=lambda v: -phi(-np.asarray(v)),
            phi1=lambda v: phi1(-np.asarray(v)),
            phi2=lambda v: -phi2(-np.asarray(v)),
            support=(-hi, -lo),
            tail_eps=self.tail_eps,
            tail_mass=self.tail_mass,
            tail_mass1=self.tail_mass1,
            max_abs_phi=self.max_abs_phi,
            breakpoints=tuple(sorted(-b for b in self.breakpoints)),
            spec=None,
        )

    def grid(self, n: int = 20001) -> np.ndarray:
        return np.linspace(self.support[0], self.support[1], n)


@dataclass(frozen=True)
class CriticalPoint:
    s: float
    slope: float

    @property
    def kind(self) -> str:
        return "f0_max" if self.slope < 0 else "f0_min"


# ---------------------------------------------------------------- construction


def _as_list(params: dict, key: str, default=None) -> list[float]:
    val = params.get(key, default)
    if val is None:
        raise InvalidInput(f"missing parameter '{key}'", key)
    vals = list(val) if isinstance(val, (list, tuple)) else [val]
    try:
        return [float(x) for x in vals]
    except (TypeError, ValueError):
        raise InvalidInput(f"parameter '{key}' must be numeric", key) from None


def _components(spec: ProfileSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = spec.params
    s2 = 1.0 / math.sqrt(2.0)
    if spec.kind == "maxwellian":
        n, u, sig = _as_list(p, "n", 1.0), _as_list(p, "u", 0.0), _as_list(p, "sigma", s2)
    elif spec.kind == "two_stream":
        (n,), (u,), (sig,) = _as_list(p, "n", 1.0), _as_list(p, "u", 2.0), _as_list(p, "sigma", s2)
        n, u, sig = [n / 2, n / 2], [-u, u], [sig, sig]
    elif spec.kind == "bump_on_tail":
        n = [_as_list(p, "n_bulk", 0.9)[0], _as_list(p, "n_beam", 0.1)[0]]
        u = [_as_list(p, "u_bulk", 0.0)[0], _as_list(p, "u_beam", 4.0)[0]]
        sig = [_as_list(p, "sigma_bulk", 1.0)[0], _as_list(p, "sigma_beam", 0.5)[0]]
    else:
        n, u, sig = _as_list(p, "n"), _as_list(p, "u"), _as_list(p, "sigma")
    if not (len(n) == len(u) == len(sig)) or not n:
        raise InvalidInput("n, u, sigma must have equal nonzero length", "n")
    n_, u_, s_ = np.array(n), np.array(u), np.array(sig)
    if np.any(~np.isfinite(n_)) or np.any(~np.isfinite(u_)) or np.any(~np.isfinite(s_)):
        raise InvalidInput("parameters must be finite", "params")
    if np.any(s_ <= 0):
        raise InvalidInput("all widths sigma must be > 0", "sigma")
    if np.any(n_ < 0):
        raise InvalidInput("all densities n must be >= 0", "n")
    if not np.any(n_ > 0):
        raise InvalidInput("at least one density n must be > 0", "n")
    keep = n_ > 0
    return n_[keep], u_[keep], s_[keep]


def _gaussian_evaluators(n, u, sig):
    c = n / (sig * _SQRT2PI)

    def parts(v):
        v = np.asarray(v, dtype=float)
        x = (v[..., None] - u) / sig
        return x, c * np.exp(-0.5 * x * x)

    def f0(v):
        return parts(v)[1].sum(-1)

    def phi(v):
        x, g = parts(v)
        return (-x * g / sig).sum(-1)

    def phi1(v):
        x, g = parts(v)
        return ((x * x - 1.0) * g / sig**2).sum(-1)

    def phi2(v):
        x, g = parts(v)
        return ((3.0 * x - x**3) * g / sig**3).sum(-1)

    return f0, phi, phi1, phi2


def _synthetic_evaluators(a, u, sig):
    def parts(v):
        v = np.asarray(v, dtype=float)
        x = (v[..., None] - u) / sig
        return x, np.exp(-0.5 * x * x)

    def phi(v):
        x, g = parts(v)
        return (a * sig * x * g).sum(-1)

    def phi1(v):
        x, g = parts(v)
        return (a * (1.0 - x * x) * g).sum(-1)

    def phi2(v):
        x, g = parts(v)
        return (a * (x**3 - 3.0 * x) * g / sig).sum(-1)

    return phi, phi1, phi2


def _gauss_cut(amplitude: float, eps: float) -> float:
    """Smallest x >= 2 with amplitude * x * exp(-x^2/2) <= eps."""
    if amplitude <= eps:
        return 2.0
    x = 2.0
    for _ in range(60):
        x_new = math.sqrt(max(2.0 * math.log(amplitude * x / eps), 4.0))
        if abs(x_new - x) < 1e-12:
            break
        x = x_new
    return max(x, 2.0)


def _scan_max(fun: Evaluator, lo: float, hi: float, n: int = 20001) -> tuple[float, float]:
    grid = np.linspace(lo, hi, n)
    vals = np.abs(fun(grid))
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    if b > a:
        res = minimize_scalar(lambda v: -abs(float(fun(np.array(v)))), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-13})
        if -res.fun > vals[i]:
            return float(res.x), float(-res.fun)
    return float(grid[i]), float(vals[i])


def _build_gaussian(spec: ProfileSpec) -> VelocityProfile:
    n, u, sig = _components(spec)
    f0, phi, phi1, phi2 = _gaussian_evaluators(n, u, sig)
    wide = (float(np.min(u - 12 * sig)), float(np.max(u + 12 * sig)))
    _, max_phi = _scan_max(phi, *wide)
    tail_eps = TAIL_REL * max_phi
    c = n / (sig * _SQRT2PI)
    # |phi_i| = (c_i / sigma_i) |x| exp(-x^2/2); cut each component where that falls below tail_eps / m.
    m = len(n)
    cuts = np.array([_gauss_cut(ci / si, tail_eps / m) for ci, si in zip(c, sig)])
    lo = float(np.min(u - cuts * sig))
    hi = float(np.max(u + cuts * sig))
    # Beyond |x| > 1 (resp. sqrt 3) each component of phi (resp. phi') is monotone, so
    # the cut-off mass is bounded by the component values of f0 (resp. |phi|) at the ends.
    x_lo, x_hi = (lo - u) / sig, (hi - u) / sig
    tail_mass = float(np.sum(c * (np.exp(-0.5 * x_lo**2) + np.exp(-0.5 * x_hi**2))))
    tail_mass1 = float(np.sum(c / sig * (np.abs(x_lo) * np.exp(-0.5 * x_lo**2) + x_hi * np.exp(-0.5 * x_hi**2))))
    return VelocityProfile(spec.kind, f0, phi, phi1, phi2, (lo, hi), tail_eps, tail_mass, tail_mass1,
                           max_phi, (), spec)


def _build_synthetic(spec: ProfileSpec) -> VelocityProfile:
    p = spec.params
    a = np.array(_as_list(p, "a", 2.0))
    u = np.array(_as_list(p, "u", 0.0))
    sig = np.array(_as_list(p, "sigma", 1.0 / math.sqrt(2.0)))
    if not (a.size == u.size == sig.size):
        raise InvalidInput("a, u, sigma must have equal length", "a")
    if np.any(sig <= 0):
        raise InvalidInput("all widths sigma must be > 0", "sigma")
    if not np.any(a != 0):
        raise InvalidInput("at least one amplitude a must be nonzero", "a")
    phi, phi1, phi2 = _synthetic_evaluators(a, u, sig)
    wide = (float(np.min(u - 12 * sig)), float(np.max(u + 12 * sig)))
    _, max_phi = _scan_max(phi, *wide)
    tail_eps = TAIL_REL * max_phi
    m = len(a)
    cuts = np.array([_gauss_cut(abs(ai) * si, tail_eps / m) for ai, si in zip(a, sig)])
    lo, hi = float(np.min(u - cuts * sig)), float(np.max(u + cuts * sig))
    x_lo, x_hi = (lo - u) / sig, (hi - u) / sig
    # int_y^inf |a| y e^{-y^2/2s^2} dy = |a| s^2 e^{-x^2/2}
    tail_mass = float(np.sum(np.abs(a) * sig**2 * (np.exp(-0.5 * x_lo**2) + np.exp(-0.5 * x_hi**2))))
    tail_mass1 = float(np.sum(np.abs(a) * sig * (np.abs(x_lo) * np.exp(-0.5 * x_lo**2) + x_hi * np.exp(-0.5 * x_hi**2))))
    return VelocityProfile(spec.kind, None, phi, phi1, phi2, (lo, hi), tail_eps, tail_mass, tail_mass1,
                           max_phi, (), spec)


def _build_tabulated(spec: ProfileSpec) -> VelocityProfile:
    if spec.table is None:
        raise InvalidInput("tabulated profile requires a table", "table")
    try:
        tab = np.asarray(spec.table, dtype=float)
    except (TypeError, ValueError):
        raise InvalidInput("table must be a list of [v, f0] pairs", "table") from None
    if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 4:
        raise InvalidInput("table must be a list of at least 4 [v, f0] pairs", "table")
    v, f = tab[:, 0], tab[:, 1]
    if not np.all(np.isfinite(tab)):
        raise InvalidInput("table entries must be finite", "table")
    if np.any(np.diff(v) <= 0):
        raise InvalidInput("table velocities must be strictly increasing", "table")
    if np.any(f < 0):
        raise InvalidInput("table values f0 must be >= 0", "table")
    fmax = float(f.max())
    if fmax <= 0:
        raise InvalidInput("table values f0 must not all vanish", "table")
    if f[0] > 1e-12 * fmax or f[-1] > 1e-12 * fmax:
        raise InvalidInput("table endpoints must satisfy f0 <= 1e-12 * max(f0)", "table")
    # Quintic with vanishing third and fourth derivatives at the ends (the natural
    # quintic): phi'' stays continuous and phi converges like h^4.
    natural = [(3, 0.0), (4, 0.0)]
    spline = make_interp_spline(v, f, k=5, bc_type=(natural, natural))
    d1, d2, d3 = spline.derivative(1), spline.derivative(2), spline.derivative(3)
    lo, hi = float(v[0]), float(v[-1])

    def clip(fun):
        def wrapped(x):
            x = np.asarray(x, dtype=float)
            return np.where((x >= lo) & (x <= hi), fun(np.clip(x, lo, hi)), 0.0)
        return wrapped

    f0, phi, phi1, phi2 = clip(spline), clip(d1), clip(d2), clip(d3)
    _, max_phi = _scan_max(phi, lo, hi, 40001)
    return VelocityProfile(
        "tabulated", f0, phi, phi1, phi2, (lo, hi), TAIL_REL * max_phi,
        tail_mass=float(f[0] + f[-1]), tail_mass1=0.0, max_abs_phi=max_phi,
        breakpoints=tuple(float(x) for x in v[1:-1]), spec=spec,
    )


def build_profile(spec: ProfileSpec | dict) -> VelocityProfile:
    """Instantiate the evaluators for ``spec``; raises :class:`InvalidInput` naming the bad field."""
    if isinstance(spec, dict):
        spec = ProfileSpec.from_dict(spec)
    if spec.kind not in KINDS:
        raise InvalidInput(f"unknown profile kind {spec.kind!r}; expected one of {KINDS}", "kind")
    if spec.kind in GAUSSIAN_KINDS:
        return _build_gaussian(spec)
    if spec.kind == "signed_synthetic":
        return _build_synthetic(spec)
    return _build_tabulated(spec)


def load_profile(path: str | Path) -> VelocityProfile:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"profile file {path}: invalid JSON ({exc})", "profile") from None
    return build_profile(ProfileSpec.from_dict(data))


PRESETS = {
    "maxwellian": ProfileSpec("maxwellian", {"n": 1.0, "u": 0.0, "sigma": 1 / math.sqrt(2)}),
    "two_stream": ProfileSpec("two_stream", {"n": 1.0, "u": 2.0, "sigma": 1 / math.sqrt(2)}),
    "bump_on_tail": ProfileSpec("bump_on_tail", {"n_bulk": 0.9, "sigma_bulk": 1.0, "n_beam": 0.1,
                                                 "u_beam": 4.0, "sigma_beam": 0.5}),
    "signed_synthetic": ProfileSpec("signed_synthetic", {"a": 2.0, "u": 0.0, "sigma": 1 / math.sqrt(2)}),
}


def preset(name: str, **overrides) -> VelocityProfile:
    """Build a named preset, optionally overriding parameters (``preset("two_stream", u=3)``)."""
    try:
        base = PRESETS[name]
    except KeyError:
        raise InvalidInput(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}", "preset") from None
    return build_profile(ProfileSpec(base.kind, {**base.params, **overrides}))


# ---------------------------------------------------------------- moments

MOMENTS = ("int_phi", "int_v_phi", "int_absv_absphi", "int_absphi", "int_absv3_absphi", "max_abs_phi1")


def moment(p: VelocityProfile, kind: str) -> float:
    """Scalar functionals of phi used throughout the stability theory."""
    if kind == "max_abs_phi1":
        return _scan_max(p.phi1, *p.support, 40001)[1]
    lo, hi = p.support
    integrands = {
        "int_phi": (lambda v: p.phi(v), 0),
        "int_v_phi": (lambda v: v * p.phi(v), 1),
        "int_absv_absphi": (lambda v: np.abs(v) * np.abs(p.phi(v)), 1),
        "int_absphi": (lambda v: np.abs(p.phi(v)), 0),
        "int_absv3_absphi": (lambda v: np.abs(v) ** 3 * np.abs(p.phi(v)), 3),
    }
    if kind not in integrands:
        raise InvalidInput(f"unknown moment {kind!r}; expected one of {MOMENTS}", "kind")
    g, power = integrands[kind]
    key = ("moment", kind)
    hit = p.cache.get(key)
    if hit is not None:
        return hit
    # |v|^power tail weight; the support cut is far enough out that this is a crude but safe bound.
    vmax = max(abs(lo), abs(hi))
    tail = p.tail_mass * (vmax + 1.0) ** power
    # The absolute-value integrands have kinks at the zeros of phi and at v = 0.
    bps = list(p.breakpoints) + [0.0]
    if kind in ("int_absphi", "int_absv_absphi", "int_absv3_absphi"):
        bps += [cp.s for cp in _sign_changes(p)]
    scale = 1e-10
    first = integrate_line(g, (lo, hi), tol=1e-3, breakpoints=bps)
    res = integrate_line(g, (lo, hi), tol=scale * (1 + abs(first.value)), breakpoints=bps, tail_bound=tail)
    out = float(res.value.real)
    p.cache.put(key, out)
    return out


# ---------------------------------------------------------------- critical points


def _sign_changes(p: VelocityProfile, n: int = 20001) -> list[CriticalPoint]:
    grid = p.grid(n)
    vals = p.phi(grid)
    sig = np.abs(vals) > p.tail_eps
    idx = np.flatnonzero(sig)
    out = []
    xtol = 1e-14 * max(1.0, abs(p.support[0]), abs(p.support[1]))
    for i, j in zip(idx[:-1], idx[1:]):
        if np.sign(vals[i]) == np.sign(vals[j]):
            continue
        s = brentq(lambda v: float(p.phi(np.array(v))), grid[i], grid[j], xtol=xtol, rtol=4 * np.finfo(float).eps,
                   maxiter=500)
        out.append(CriticalPoint(float(s), float(p.phi1(np.array(s)))))
    return out


def critical_points(p: VelocityProfile) -> list[CriticalPoint]:
    """All sign changes of phi on the support, ascending, each verified non-degenerate."""
    key = ("critical_points",)
    hit = p.cache.get(key)
    if hit is not None:
        return list(hit)
    pts = _sign_changes(p)
    max_phi1 = moment(p, "max_abs_phi1")
    tol = DEGENERACY_REL * max_phi1
    for cp in pts:
        if abs(float(p.phi(np.array(cp.s)))) > max(ROOT_REL * p.max_abs_phi, 1e-300) * 10:
            raise NumericalFailure(f"critical_points: root refinement failed near s={cp.s:.12g}")
        if abs(cp.slope) < tol:
            raise DegenerateCriticalPoint(cp.s, cp.slope, tol)
    p.cache.put(key, tuple(pts))
    return pts


# ---------------------------------------------------------------- level widths


def level_widths(p: VelocityProfile, cp: CriticalPoint, mu: float) -> tuple[float, float]:
    """Ends of the connected component of ``{f0 > mu}`` around the maximum ``cp.s``."""
    if p.f0 is None:
        raise InvalidInput("level_widths: profile has no f0", "profile")
    if cp.kind != "f0_max":
        raise InvalidInput("level_widths: critical point must be a maximum of f0", "cp")
    f0 = p.f0
    top = float(f0(np.array(cp.s)))
    if not (0.0 < mu < top):
        raise InvalidInput(f"level_widths: mu={mu!r} outside (0, f0(s)={top:.12g})", "mu")
    key = ("level_widths", cp.s, float(mu))
    hit = p.cache.get(key)
    if hit is not None:
        return hit
    lo, hi = p.support
    n = 40001

    def walk(end: float) -> float:
        xs = np.linspace(cp.s, end, n)
        below = np.flatnonzero(f0(xs) <= mu)
        if below.size == 0:
            raise NumericalFailure("level_widths: level set does not close inside the support")
        j = int(below[0])
        inner, outer = float(xs[j - 1]), float(xs[j])
        # invariant: f0(inner) > mu >= f0(outer)
        while abs(outer - inner) > 1e-12:
            m = 0.5 * (inner + outer)
            if float(f0(np.array(m))) <= mu:
                outer = m
            else:
                inner = m
        return outer

    out = (walk(lo), walk(hi))
    p.cache.put(key, out)
    return out
