"""Linear stability analysis of one-dimensional collisionless plasma equilibria."""

from .profiles import ProfileSpec, VelocityProfile, CriticalPoint, build_profile, load_profile, preset

__all__ = ["ProfileSpec", "VelocityProfile", "CriticalPoint", "build_profile", "load_profile", "preset"]
__version__ = "0.1.0"
