"""Scalar kernels and the Drude material model.

The Hankel function :math:`H_0^{(1)}` is evaluated in-repo: the ascending
series for arguments up to ``HANKEL_CROSSOVER`` and Hankel's asymptotic
expansion beyond it.  Keeping it local makes every kernel bit-reproducible
across platforms and lets the test-suite use :func:`scipy.special.hankel1`
as an independent oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

EULER_GAMMA = 0.57721566490153286
HANKEL_CROSSOVER = 8.0
DEFAULT_EXPANSION_ORDER = 2

_SERIES_TERMS = 48
_ASYMPTOTIC_TERMS = 60


@dataclass(frozen=True)
class DrudeParams:
    """Plasma frequency and damping of the Drude permittivity (rad/time)."""

    omega_p: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if not (self.omega_p > 0 and self.tau > 0):
            raise ValueError(
                f"Drude parameters must be positive, got omega_p={self.omega_p}, tau={self.tau}"
            )


def _check_omega(omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be strictly positive")
    return omega


def drude_eps(params: DrudeParams, omega):
    """Complex permittivity ``1 - omega_p**2 / (omega (omega + i tau))``."""
    w = _check_omega(omega)
    return 1.0 - params.omega_p**2 / (w * (w + 1j * params.tau))


def drude_eps_expansion(params: DrudeParams, omega, order: int = 2):
    """Low-frequency expansion of :func:`drude_eps`.

    Terms are kept up to and including ``omega**order``; ``order`` may be
    -1, 0, 1 or 2.  The neglected remainder is O(omega**3) at order 2.
    """
    if order not in (-1, 0, 1, 2):
        raise ValueError("order must be one of -1, 0, 1, 2")
    w = _check_omega(omega)
    wp2, tau = params.omega_p**2, params.tau
    terms = [
        1j * wp2 / tau / w,
        (1.0 - wp2 / tau**2) + 0.0 * w,
        -1j * w * wp2 / tau**3,
        w**2 * wp2 / tau**4,
    ]
    return sum(terms[: order + 2])


# --------------------------------------------------------------------------
# Hankel function of the first kind, order zero
# --------------------------------------------------------------------------


def _bessel_series(z):
    """J0, and the part of Y0 that is regular at the origin, by ascending series.

    Returns ``(j0, s)`` with ``Y0 = (2/pi) [(ln(z/2) + gamma) J0 + s]``.
    """
    q = 0.25 * z * z
    term = np.ones_like(z)
    j0 = np.ones_like(z)
    s = np.zeros_like(z)
    harmonic = 0.0
    for k in range(1, _SERIES_TERMS):
        term = term * (-q) / (k * k)
        harmonic += 1.0 / k
        j0 = j0 + term
        s = s - harmonic * term
    return j0, s


def _hankel_asymptotic(z):
    """Hankel's expansion truncated at its smallest term (optimal truncation).

    The truncation error is about ``exp(-2 z)``: roughly 1e-8 relative at
    the crossover ``z = 8`` and below 1e-12 from ``z = 14`` on.
    """
    total = np.ones_like(z, dtype=complex)
    term = np.ones_like(z, dtype=complex)
    prev = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, _ASYMPTOTIC_TERMS):
        term = term * (-1j * (2 * k - 1) ** 2 / (8.0 * k)) / z
        size = np.abs(term)
        active &= size < prev
        if not np.any(active):
            break
        total = total + np.where(active, term, 0.0)
        prev = size
    return np.sqrt(2.0 / (np.pi * z)) * np.exp(1j * (z - np.pi / 4)) * total


def _hankel_series(z):
    j0, s = _bessel_series(z)
    y0 = (2.0 / np.pi) * ((np.log(0.5 * z) + EULER_GAMMA) * j0 + s)
    return j0 + 1j * y0


def hankel1_0(z, crossover: float = HANKEL_CROSSOVER):
    """:math:`H_0^{(1)}(z)` for real ``z > 0``."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("hankel1_0 requires z > 0")
    out = np.empty(z.shape, dtype=complex)
    small = z <= crossover
    if np.any(small):
        out[small] = _hankel_series(z[small])
    if np.any(~small):
        out[~small] = _hankel_asymptotic(z[~small])
    return out


# --------------------------------------------------------------------------
# Green functions
# --------------------------------------------------------------------------


def _distance(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x[..., 0] - y[..., 0], x[..., 1] - y[..., 1])
    if np.any(r == 0):
        raise ValueError("Green function evaluated at coincident points")
    return r


def laplace_green(x, y):
    """Fundamental solution of the Laplacian, ``ln|x - y| / (2 pi)``."""
    return np.log(_distance(x, y)) / (2 * np.pi)


def helmholtz_green_radial(r, k):
    """Outgoing Helmholtz Green function ``-(i/4) H0(k r)`` as a function of r."""
    return -0.25j * hankel1_0(k * np.asarray(r, dtype=float))


def helmholtz_green(x, y, k):
    """``Phi(x, y, k) = -(i/4) H0^(1)(k |x - y|)``."""
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    return helmholtz_green_radial(_distance(x, y), k)


def helmholtz_smooth_part(r, k):
    """``Phi(r, k) - ln(r)/(2 pi)``, continuous at r = 0.

    Evaluated without cancellation on the series branch; the value at the
    origin is ``N + ln(k)/(2 pi) - i/4``.
    """
    r = np.asarray(r, dtype=float)
    z = k * r
    out = np.empty(r.shape, dtype=complex)
    small = z <= HANKEL_CROSSOVER
    if np.any(small):
        rs = r[small]
        j0, s = _bessel_series(z[small])
        with np.errstate(divide="ignore", invalid="ignore"):
            log_r = np.where(rs > 0, np.log(np.where(rs > 0, rs, 1.0)), 0.0)
        re = ((math.log(0.5 * k) + EULER_GAMMA) * j0 + log_r * (j0 - 1.0) + s) / (2 * np.pi)
        out[small] = re - 0.25j * j0
    if np.any(~small):
        rl = r[~small]
        out[~small] = helmholtz_green_radial(rl, k) - np.log(rl) / (2 * np.pi)
    return out


@dataclass(frozen=True)
class ExpansionConstants:
    """Constants of the small-argument expansion of the Helmholtz kernel.

    ``b[j-1]`` and ``c[j-1]`` multiply ``ln(k r) (k r)^{2j}`` and
    ``(k r)^{2j}``.  ``c_j = b_j (gamma - ln 2 - i pi/2 - H_j)`` with
    ``H_j`` the j-th harmonic number; this is the sign that reproduces
    ``-(i/4) H0(k r)`` term by term.
    """

    J: int
    gamma_e: float = EULER_GAMMA
    N: float = field(init=False)
    b: np.ndarray = field(init=False, repr=False)
    c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.J < 0:
            raise ValueError("J must be non-negative")
        j = np.arange(1, self.J + 1)
        fact = np.array([math.factorial(int(i)) for i in j], dtype=float)
        b = (-1.0) ** j / (2 * np.pi * 4.0**j * fact**2)
        harmonic = np.cumsum(1.0 / j) if self.J else np.zeros(0)
        c = b * (self.gamma_e - math.log(2) - 0.5j * np.pi - harmonic)
        object.__setattr__(self, "N", (self.gamma_e - math.log(2)) / (2 * np.pi))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    def to_dict(self):
        return {
            "J": self.J,
            "gamma_e": self.gamma_e,
            "N": self.N,
            "b": self.b.tolist(),
            "c_real": self.c.real.tolist(),
            "c_imag": self.c.imag.tolist(),
        }

    def dump_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def expansion_constants(J: int = DEFAULT_EXPANSION_ORDER, gamma_e: float = EULER_GAMMA):
    return ExpansionConstants(J, gamma_e)


N_CONST = (EULER_GAMMA - math.log(2)) / (2 * np.pi)


def green_low_freq_expansion(x, y, k, J: int = DEFAULT_EXPANSION_ORDER, constants=None):
    """Truncated small-argument expansion of :func:`helmholtz_green`."""
    r = _distance(x, y)
    kr = k * r
    if np.any(kr >= 1):
        raise ValueError("expansion requires k|x - y| < 1")
    const = constants if constants is not None else ExpansionConstants(J)
    if const.J < J:
        raise ValueError("constants computed for fewer terms than requested")
    out = np.log(r) / (2 * np.pi) + const.N + math.log(k) / (2 * np.pi) - 0.25j
    out = out + 0j
    log_kr = np.log(kr)
    for j in range(1, J + 1):
        out = out + (const.b[j - 1] * log_kr + const.c[j - 1]) * kr ** (2 * j)
    return out
