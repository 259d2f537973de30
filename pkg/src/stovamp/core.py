"""Gaussian messages, precision guards and the random-number contract.

Every message exchanged by the solvers is an isotropic circular complex
Gaussian ``CN(mean, 1/precision * I)``.  Vectors are plain numpy arrays:
``complex128`` for signals and messages, ``float64`` for magnitude
observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import numpy.typing as npt

PREC_MIN = 1e-11
PREC_MAX = 1e11

ComplexVector = npt.NDArray[np.complex128]
#: Non-negative magnitude observations. Kept real on purpose.
Magnitudes = npt.NDArray[np.float64]
ArrayLike = Union[npt.ArrayLike, ComplexVector]


class StovampError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(StovampError, ValueError):
    pass


class NumericalError(StovampError, ArithmeticError):
    pass


class ConfigError(StovampError, ValueError):
    pass


class CapabilityError(StovampError, TypeError):
    pass


def clamp_precision(prec: float) -> float:
    return float(min(max(prec, PREC_MIN), PREC_MAX))


def as_complex_vector(x: ArrayLike, name: str = "vector") -> ComplexVector:
    """Return ``x`` as a 1-d complex128 array, checking shape and finiteness."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class GaussianMessage:
    """Isotropic complex Gaussian with a scalar precision.

    The precision is clamped to ``[PREC_MIN, PREC_MAX]`` on construction and
    the mean is stored as a read-only copy.
    """

    mean: ComplexVector
    precision: float

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.complex128)
        if mean.ndim != 1 or mean.size == 0:
            raise DimensionError(f"message mean must be a non-empty 1-d vector, got shape {mean.shape}")
        if not np.all(np.isfinite(mean)):
            raise NumericalError("message mean contains non-finite entries")
        prec = float(self.precision)
        if not np.isfinite(prec):
            raise NumericalError(f"message precision is not finite: {prec}")
        mean.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision", clamp_precision(prec))

    def __len__(self):
        return self.mean.size

    @property
    def variance(self) -> float:
        return 1.0 / self.precision


def _check_lengths(a, b):
    if len(a) != len(b):
        raise DimensionError(f"length mismatch: {len(a)} vs {len(b)}")


def gaussian_product(a: GaussianMessage, b: GaussianMessage) -> GaussianMessage:
    """Product of two isotropic Gaussians (renormalised)."""
    _check_lengths(a, b)
    prec = a.precision + b.precision
    mean = (a.precision * a.mean + b.precision * b.mean) / prec
    return GaussianMessage(mean, prec)


def ep_extrinsic(belief_mean: ArrayLike, belief_prec: float,
                 in_mean: ArrayLike, in_prec: float) -> GaussianMessage:
    """Divide a Gaussian belief by the incoming message.

    Returns the outgoing (extrinsic) message.  When the precision
    difference is not positive the message carries the belief mean with
    precision ``PREC_MIN``.
    """
    belief_mean = np.asarray(belief_mean, dtype=np.complex128)
    in_mean = np.asarray(in_mean, dtype=np.complex128)
    if belief_mean.shape != in_mean.shape:
        raise DimensionError(f"length mismatch: {belief_mean.shape} vs {in_mean.shape}")
    if not (np.isfinite(belief_prec) and np.isfinite(in_prec)):
        raise NumericalError(f"non-finite precision (belief={belief_prec}, incoming={in_prec})")
    if not (np.all(np.isfinite(belief_mean)) and np.all(np.isfinite(in_mean))):
        raise NumericalError("non-finite mean passed to ep_extrinsic")
    prec = belief_prec - in_prec
    if prec <= PREC_MIN:
        return GaussianMessage(belief_mean, PREC_MIN)
    mean = (belief_prec * belief_mean - in_prec * in_mean) / prec
    return GaussianMessage(mean, prec)


def damped_update(raw: GaussianMessage, old: GaussianMessage | None, rho: float) -> GaussianMessage:
    """Convex blend ``rho * raw + (1 - rho) * old`` of means and precisions.

    ``old=None`` (no previous message yet) returns ``raw``.
    """
    if not 0.0 < rho <= 1.0:
        raise ConfigError(f"damping rho must lie in (0, 1], got {rho}")
    if old is None or rho == 1.0:
        return raw
    _check_lengths(raw, old)
    mean = rho * raw.mean + (1.0 - rho) * old.mean
    prec = rho * raw.precision + (1.0 - rho) * old.precision
    return GaussianMessage(mean, prec)


@dataclass
class RngHandle:
    """Seeded random stream.

    Handles with the same ``(seed, stream)`` produce identical draws.  A
    handle is meant to be consumed by one owner; use :meth:`spawn` to get an
    independent stream for another consumer.
    """

    seed: int
    stream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seq = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream),))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def spawn(self, stream: int) -> "RngHandle":
        return RngHandle(self.seed, stream)


def sample_standard_complex_gaussian(n: int, rng: RngHandle) -> ComplexVector:
    """``n`` i.i.d. CN(0, 1) draws (real and imaginary variance 1/2 each)."""
    if n <= 0:
        raise DimensionError(f"n must be positive, got {n}")
    g = rng.generator.standard_normal((2, n))
    return (g[0] + 1j * g[1]) / np.sqrt(2.0)
