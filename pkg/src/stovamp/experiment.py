"""Synthetic problem instances for the Haar and coded-diffraction experiments.

Randomness is split into independent streams of one seed: 0 for the signal,
1 for the operators, 2 for the noise and 3 for the solver's initialisation.
Changing the solver therefore never changes the problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ConfigError, RngHandle, sample_standard_complex_gaussian
from .denoisers import GaussianPrior, RicianChannel
from .metrics import generate_observation, snr_to_noise_precision
from .sensing import SensingOperator, sample_cdp_operators, sample_haar_columns

SIGNAL_STREAM, OPERATOR_STREAM, NOISE_STREAM, SOLVER_STREAM = 0, 1, 2, 3


@dataclass
class Problem:
    x: np.ndarray
    operators: list[SensingOperator]
    observations: list[np.ndarray]
    channel: RicianChannel
    shape: Optional[tuple[int, int]] = None

    @property
    def n(self) -> int:
        return self.operators[0].input_dim

    @property
    def block_rows(self) -> int:
        return self.operators[0].output_dim

    @property
    def realized_alpha(self) -> float:
        return len(self.operators) * self.block_rows / self.n


def haar_block_rows(n: int, alpha: float, L: int) -> int:
    """Rows per block, ``round(alpha n / L)``; must be at least ``n``."""
    if n < 1 or L < 1 or not alpha > 0:
        raise ConfigError(f"need n >= 1, L >= 1, alpha > 0; got n={n}, L={L}, alpha={alpha}")
    mbar = int(round(alpha * n / L))
    if mbar < n:
        raise ConfigError(f"alpha*n/L = {alpha * n / L:g} gives {mbar} rows per block, fewer than n={n}")
    return mbar


def observe(x, operators: Sequence[SensingOperator], snr_db: float, seed: int):
    zs = [op.apply(x) for op in operators]
    ch = RicianChannel(snr_to_noise_precision(snr_db, zs))
    noise = RngHandle(seed, NOISE_STREAM)
    ys = [generate_observation(ch, z, noise) for z in zs]
    for op in operators:
        op.reset_counters()
    return ys, ch


def haar_problem(n: int, alpha: float, L: int, snr_db: float, seed: int,
                 prior: GaussianPrior = GaussianPrior()) -> Problem:
    mbar = haar_block_rows(n, alpha, L)
    x = np.sqrt(prior.variance) * sample_standard_complex_gaussian(n, RngHandle(seed, SIGNAL_STREAM))
    rng = RngHandle(seed, OPERATOR_STREAM)
    ops = [sample_haar_columns(mbar, n, rng) for _ in range(L)]
    ys, ch = observe(x, ops, snr_db, seed)
    return Problem(x, ops, ys, ch)


def cdp_problem(image, L: int, snr_db: float, seed: int) -> Problem:
    """Coded-diffraction problem for a 2-d (real or complex) image."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ConfigError(f"image must be 2-d, got shape {image.shape}")
    h, w = image.shape
    x = image.astype(np.complex128).ravel()
    if not np.any(x):
        raise ConfigError("image is all zero")
    ops = sample_cdp_operators(h, w, L, RngHandle(seed, OPERATOR_STREAM))
    ys, ch = observe(x, ops, snr_db, seed)
    return Problem(x, ops, ys, ch, shape=(h, w))


def random_cdp_problem(h: int, w: int, L: int, snr_db: float, seed: int,
                       prior: GaussianPrior = GaussianPrior()) -> Problem:
    """Coded-diffraction problem with the signal drawn from the prior."""
    x = np.sqrt(prior.variance) * sample_standard_complex_gaussian(h * w, RngHandle(seed, SIGNAL_STREAM))
    return cdp_problem(x.reshape(h, w), L, snr_db, seed)


def solver_rng(seed: int) -> RngHandle:
    return RngHandle(seed, SOLVER_STREAM)
