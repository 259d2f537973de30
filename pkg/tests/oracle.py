"""Slow reference computations used only by the test-suite.

Nothing here is imported by the package.  The Rician posterior is obtained
by brute-force quadrature over the complex plane, independently of the
closed form used by the denoiser.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ive


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    radial_points: int = 2000
    angular_points: int = 512
    cutoff: float = 12.0  # in posterior standard deviations

    def __post_init__(self):
        if self.radial_points < 64 or self.angular_points < 64:
            raise ValueError("quadrature needs at least 64 points per axis")


def _log_i0(x):
    # log I0(x) = log(ive(0, x)) + x; ive gives NaN near 1e9, so switch to the
    # large-argument expansion well before that
    x = np.asarray(x, dtype=float)
    big = x > 1e6
    small = np.where(big, 0.0, x)
    xb = np.where(big, x, 1e6)
    asym = xb - 0.5 * np.log(2 * np.pi * xb) + np.log1p(1 / (8 * xb) + 9 / (128 * xb**2))
    return np.where(big, asym, np.log(ive(0, small)) + small)


def _radial_window(p, tau, y, gamma_w, cutoff):
    """Radius interval holding the posterior mass, from a coarse scan.

    The scan uses the angle-integrated density, which only decides where
    to put the fine grid; the moments themselves come from the 2-d grid.
    """
    ap = abs(p)
    scale = np.sqrt(1.0 / tau + 1.0 / gamma_w)
    lo, hi = 0.0, max(ap, y) + 40.0 * scale + 1.0
    # zoom in until the kept region is well resolved (narrow posteriors at high gamma_w)
    for _ in range(8):
        r = np.linspace(lo, hi, 20001)
        logf = (np.log(np.maximum(r, 1e-300)) - tau * (r - ap) ** 2 + _log_i0(2 * tau * ap * r) - 2 * tau * ap * r
                - gamma_w * (r - y) ** 2 + _log_i0(2 * gamma_w * y * r) - 2 * gamma_w * y * r)
        logf -= logf.max()
        keep = np.nonzero(logf > -0.5 * cutoff**2)[0]
        if keep.size == 0:
            raise OracleError("radial scan found no posterior mass; increase the cutoff")
        dr = r[1] - r[0]
        lo = max(r[keep[0]] - 2 * dr, 0.0)
        hi = r[keep[-1]] + 2 * dr
        if keep.size >= 200:
            break
    return lo, hi


@lru_cache(maxsize=8)
def _legendre(points: int):
    # node computation is an eigenproblem; far slower than the quadrature itself
    return np.polynomial.legendre.leggauss(points)


def oracle_rician_posterior(p, tau, y, gamma_w, spec=QuadratureSpec()):
    """Posterior mean and variance of ``z`` given ``y = |z + w|``.

    Prior ``z ~ CN(p, 1/tau)``, noise ``w ~ CN(0, 1/gamma_w)``.  The Rician
    likelihood ``p(y | |z|) ∝ exp(-gamma_w |z|^2) I0(2 gamma_w y |z|)`` (the
    ``z``-independent factors cancel) is evaluated in log space on a polar
    grid: Gauss-Legendre in radius, uniform trapezoid in angle.
    """
    p = complex(p)
    lo, hi = _radial_window(p, tau, y, gamma_w, spec.cutoff)
    xg, wg = _legendre(spec.radial_points)
    r = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
    wr = 0.5 * (hi - lo) * wg
    phi = np.angle(p) + 2 * np.pi * np.arange(spec.angular_points) / spec.angular_points
    Z = r[:, None] * np.exp(1j * phi)[None, :]
    # likelihood and polar Jacobian depend on the radius only
    log_radial = -gamma_w * r**2 + _log_i0(2 * gamma_w * y * r) + np.log(np.maximum(r, 1e-300))
    logw = -tau * np.abs(Z - p) ** 2 + log_radial[:, None]
    logw -= logw.max()
    w = np.exp(logw) * wr[:, None]
    total = w.sum()
    if not total > 0 or not np.isfinite(total):
        raise OracleError("all quadrature weights vanished; increase the cutoff")
    mean = (w * Z).sum() / total
    var = (w * np.abs(Z - mean) ** 2).sum() / total
    return complex(mean), float(var)


def oracle_nmse_grid(x, xhat, grid_points=10_000):
    """min over a uniform angle grid of ``||x - e^{j theta} xhat||^2 / ||x||^2``."""
    if grid_points < 1000:
        raise ValueError("grid_points must be >= 1000")
    x = np.asarray(x, dtype=complex)
    xhat = np.asarray(xhat, dtype=complex)
    theta = 2 * np.pi * np.arange(grid_points) / grid_points
    nx = np.sum(np.abs(x) ** 2)
    best = np.inf
    # small chunks keep the residual block in cache
    for chunk in np.array_split(theta, max(1, grid_points // 100)):
        d = (x[None, :] - np.exp(1j * chunk)[:, None] * xhat[None, :]).view(float)
        err = np.einsum("ij,ij->i", d, d)
        best = min(best, err.min())
    return float(best / nx)
