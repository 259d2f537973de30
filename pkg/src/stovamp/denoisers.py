"""MMSE denoisers for the input prior and the magnitude output channel.

Each denoiser combines a Gaussian pseudo-prior ``CN(r, 1/gamma)`` with a
factor of the model and returns the posterior mean together with a scalar
precision, the reciprocal of the entry-averaged posterior variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ComplexVector, ConfigError, DimensionError, clamp_precision


@dataclass(frozen=True)
class DenoiserResult:
    mean: ComplexVector
    precision: float

    def __post_init__(self):
        object.__setattr__(self, "precision", clamp_precision(self.precision))


@dataclass(frozen=True)
class GaussianPrior:
    """i.i.d. ``CN(0, variance)`` prior on the signal."""

    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ConfigError(f"prior variance must be positive, got {self.variance}")

    def denoise(self, r, gamma: float) -> DenoiserResult:
        return prior_denoise(self, r, gamma)


@dataclass(frozen=True)
class NonNegativeRealPrior:
    """Placeholder for a non-negative real prior on image pixels.

    Declared so that configuration code can name it; denoising with it is
    not implemented.
    """

    def denoise(self, r, gamma: float) -> DenoiserResult:
        raise NotImplementedError("non-negative real prior is not implemented")


@dataclass(frozen=True)
class RicianChannel:
    """Observation ``y = |z + w|`` with ``w ~ CN(0, 1/noise_precision)``."""

    noise_precision: float

    def __post_init__(self):
        if not self.noise_precision > 0:
            raise ConfigError(f"noise precision must be positive, got {self.noise_precision}")

    @property
    def noise_variance(self) -> float:
        return 1.0 / self.noise_precision

    def denoise(self, p, tau: float, y) -> DenoiserResult:
        return rician_denoise(self, p, tau, y)


def prior_denoise(prior: GaussianPrior, r, gamma: float) -> DenoiserResult:
    """Conjugate posterior of ``CN(0, s2)`` times ``CN(r, 1/gamma)``."""
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    s2 = prior.variance
    r = np.asarray(r, dtype=np.complex128)
    return DenoiserResult((gamma * s2 / (1.0 + gamma * s2)) * r, 1.0 / s2 + gamma)


# Series and asymptotic coefficients for the Bessel ratio.
_SERIES_TERMS = 64
_SERIES_SWITCH = 20.0
_HANKEL_TERMS = 24


def _hankel_coeffs(nu: int, terms: int) -> np.ndarray:
    # a_k(nu) = prod_{i=1..k} (4 nu^2 - (2i-1)^2) / (k! 8^k)
    mu = 4.0 * nu * nu
    out = np.empty(terms)
    a = 1.0
    out[0] = a
    for k in range(1, terms):
        a *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
        out[k] = a
    return out


_A0 = _hankel_coeffs(0, _HANKEL_TERMS)
_A1 = _hankel_coeffs(1, _HANKEL_TERMS)


def bessel_ratio(kappa):
    """``I1(kappa) / I0(kappa)`` for ``kappa >= 0``, without overflow.

    Power series below ``kappa = 20``; above, the ratio of the two Hankel
    asymptotic expansions, whose truncation error at ``kappa >= 20`` is below
    double precision.  Accepts scalars or arrays.
    """
    k = np.asarray(kappa, dtype=np.float64)
    if np.any(k < 0) or not np.all(np.isfinite(k)):
        raise ConfigError("bessel_ratio needs finite, non-negative kappa")
    scalar = k.ndim == 0
    k = np.atleast_1d(k)
    out = np.empty_like(k)

    lo = k < _SERIES_SWITCH
    if np.any(lo):
        kl = k[lo]
        q = 0.25 * kl * kl
        t0 = np.ones_like(kl)  # (q^j / j!^2)
        s0 = t0.copy()
        s1 = t0.copy()  # sum of q^j / (j! (j+1)!)
        for j in range(1, _SERIES_TERMS):
            t0 = t0 * q / (j * j)
            s0 += t0
            s1 += t0 / (j + 1)
        out[lo] = 0.5 * kl * s1 / s0

    hi = ~lo
    if np.any(hi):
        inv = 1.0 / k[hi]
        # Horner in powers of (-1/kappa).
        x = -inv
        p0 = np.full_like(inv, _A0[-1])
        p1 = np.full_like(inv, _A1[-1])
        for j in range(_HANKEL_TERMS - 2, -1, -1):
            p0 = p0 * x + _A0[j]
            p1 = p1 * x + _A1[j]
        out[hi] = p1 / p0

    return float(out[0]) if scalar else out


def rician_denoise(ch: RicianChannel, p, tau: float, y) -> DenoiserResult:
    """Posterior mean and averaged precision of ``z`` given ``y = |z + w|``.

    With pseudo-prior ``z ~ CN(p, 1/tau)``, write ``u = z + w``.  Given
    ``|u| = y`` the phase of ``u`` is von Mises around ``arg p`` with
    concentration ``2 y |p| / (1/tau + 1/gamma_w)``; given ``u``, ``z`` is a
    Gaussian shrinkage of ``p`` toward ``u``.  Both stages are closed form.
    """
    if not tau > 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    p = np.asarray(p, dtype=np.complex128)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise DimensionError(f"p and y shapes differ: {p.shape} vs {y.shape}")
    if np.any(y < 0):
        raise ConfigError("magnitude observations must be non-negative")

    nu_p = 1.0 / tau
    nu_w = ch.noise_variance
    nu = nu_p + nu_w
    g = nu_p / nu
    abs_p = np.abs(p)
    ratio = bessel_ratio(2.0 * y * abs_p / nu)
    # unit phasor of p, defined as 0 where p == 0 (R(0) = 0 there anyway)
    phase = np.where(abs_p > 0, np.exp(1j * np.angle(p)), 0.0)
    eu = y * ratio * phase
    mean = p + g * (eu - p)
    var = g * g * y * y * (1.0 - ratio * ratio) + g * nu_w
    avg = float(np.mean(var))
    return DenoiserResult(mean, 1.0 / avg if avg > 0 else math.inf)
