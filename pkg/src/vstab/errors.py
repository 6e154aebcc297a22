"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes):

* :class:`HypothesisViolation` - the input is well formed but violates a
  standing assumption of the index theory (degenerate critical point,
  embedded mode on the imaginary axis, ...).
* :class:`NumericalFailure` - an algorithm ran out of budget or could not
  certify its answer.

Malformed input raises :class:`InvalidInput`, a ``ValueError``.
"""

from __future__ import annotations


class VstabError(Exception):
    """Base class for every error raised by the package."""


class InvalidInput(VstabError, ValueError):
    """Rejected argument; ``field`` names the offending parameter when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class HypothesisViolation(VstabError):
    """A precondition of the instability-index formula does not hold."""


class DegenerateCriticalPoint(HypothesisViolation):
    def __init__(self, s: float, slope: float, tol: float):
        super().__init__(
            f"critical_points: degenerate zero of phi at s={s:.12g} "
            f"(|phi'(s)|={abs(slope):.3e} < {tol:.3e}); zeros of phi must be non-degenerate"
        )
        self.s = s
        self.slope = slope


class EmbeddedMode(HypothesisViolation):
    def __init__(self, k: float, points: list[float], values: list[float]):
        desc = ", ".join(f"s={s:.10g} (value {v:.3e})" for s, v in zip(points, values))
        super().__init__(
            f"instability_index: 1 - pv/k^2 vanishes at k={k:.12g} for {desc}; "
            "a root sits on the imaginary axis and the index is undefined"
        )
        self.k = k
        self.points = points


class GeometryError(InvalidInput):
    """Two-stream geometry does not match the profile, or a level set crosses the valley."""


class NumericalFailure(VstabError):
    """An iterative or adaptive procedure failed to reach its tolerance."""


class QuadratureError(NumericalFailure):
    def __init__(self, message: str, worst_panel: tuple[float, float], worst_err: float):
        super().__init__(f"{message}; worst panel [{worst_panel[0]:.6g}, {worst_panel[1]:.6g}] err={worst_err:.3e}")
        self.worst_panel = worst_panel
        self.worst_err = worst_err


class ContourError(NumericalFailure):
    """Winding number could not be certified on the sampled contour."""


class RootOnContour(ContourError):
    pass
