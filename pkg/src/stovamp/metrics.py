"""Error metrics, SNR calibration and synthetic observations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ConfigError, DimensionError, Magnitudes, RngHandle
from .denoisers import RicianChannel


@dataclass(frozen=True)
class TraceRecord:
    """Diagnostics after one inner (block) step of a solver run.

    ``block`` is 1-based.  ``nmse_db`` is ``None`` when the true signal is
    unknown.
    """

    iteration: int
    block: int
    nmse_db: Optional[float]
    eta1: float
    gamma1: float
    tau1: float
    wall_ms: float


def phase_alignment(x, xhat) -> float:
    """Angle ``theta`` minimising ``||x - exp(1j*theta) xhat||``."""
    return float(np.angle(np.vdot(xhat, x)))


def nmse(x, xhat) -> float:
    """Normalised squared error, minimised over a global phase only."""
    x = np.asarray(x, dtype=np.complex128)
    xhat = np.asarray(xhat, dtype=np.complex128)
    if x.shape != xhat.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    nx = float(np.vdot(x, x).real)
    if nx == 0:
        raise ConfigError("nmse undefined for an all-zero reference signal")
    nh = float(np.vdot(xhat, xhat).real)
    err = (nx + nh - 2.0 * abs(np.vdot(x, xhat))) / nx
    return max(err, 0.0)


def nmse_db(x, xhat) -> float:
    e = nmse(x, xhat)
    return 10.0 * math.log10(e) if e > 0 else -math.inf


def snr_to_noise_precision(snr_db: float, z_blocks: Sequence) -> float:
    """Noise precision giving ``snr_db`` relative to the realised mean ``|z|^2``."""
    z = np.concatenate([np.asarray(b, dtype=np.complex128).ravel() for b in z_blocks])
    power = float(np.mean(np.abs(z) ** 2)) if z.size else 0.0
    if power == 0:
        raise ConfigError("cannot calibrate SNR against an all-zero signal")
    return 1.0 / (10.0 ** (-snr_db / 10.0) * power)


def generate_observation(ch: RicianChannel, z, rng: RngHandle) -> Magnitudes:
    """Draw ``y = |z + w|`` with circular complex Gaussian ``w``."""
    z = np.asarray(z, dtype=np.complex128)
    g = rng.generator.standard_normal((2,) + z.shape)
    w = (g[0] + 1j * g[1]) * math.sqrt(0.5 * ch.noise_variance)
    return np.abs(z + w)
