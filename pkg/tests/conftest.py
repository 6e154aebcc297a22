import math

import numpy as np
import pytest
from scipy.special import wofz

from vstab import preset


@pytest.fixture(scope="session")
def maxwellian():
    return preset("maxwellian")


@pytest.fixture(scope="session")
def two_stream():
    return preset("two_stream")


@pytest.fixture(scope="session")
def bump():
    return preset("bump_on_tail")


@pytest.fixture(scope="session")
def synthetic():
    return preset("signed_synthetic")


def plasma_z(zeta: complex) -> complex:
    """Cauchy integral (1/sqrt(pi)) int exp(-v^2)/(v - zeta) dv off the real axis."""
    zeta = complex(zeta)
    if zeta.imag > 0:
        return 1j * math.sqrt(math.pi) * wofz(zeta)
    if zeta.imag < 0:
        return np.conj(1j * math.sqrt(math.pi) * wofz(np.conj(zeta)))
    return 1j * math.sqrt(math.pi) * wofz(zeta)  # upper boundary value


def maxwellian_cauchy(zeta: complex) -> complex:
    """int phi/(v - zeta) dv for f0 = exp(-v^2)/sqrt(pi): Z'(zeta) = -2(1 + zeta Z)."""
    return -2.0 * (1.0 + zeta * plasma_z(zeta))


def maxwellian_delta(k: float, lam: complex) -> complex:
    z = 1j * lam / k
    return 1.0 - maxwellian_cauchy(z) / k**2
