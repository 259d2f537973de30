"""Self-checks of the brute-force references themselves."""

import numpy as np
import pytest
from scipy.special import ive

from oracle import QuadratureSpec, oracle_nmse_grid, oracle_rician_posterior


def test_zero_p_symmetry():
    m, _ = oracle_rician_posterior(0.0, 1.0, 1.3, 10.0)
    assert abs(m) < 1e-8


def test_noiseless_proxy():
    m, _ = oracle_rician_posterior(1.0, 1.0, 2.0, 1e8)
    assert abs(m) == pytest.approx(2 * ive(1, 4.0) / ive(0, 4.0), abs=1e-3)


def test_gaussian_case_without_likelihood_information():
    # y = 0 and a unit noise precision: posterior is CN(p/2, 1/2)
    m, v = oracle_rician_posterior(1.0, 1.0, 0.0, 1.0)
    assert m == pytest.approx(0.5, abs=1e-10)
    assert v == pytest.approx(0.5, rel=1e-8)


@pytest.mark.parametrize("p,tau,y,gw", [(1.0, 1.0, 1.0, 100.0), (0.1 + 0.3j, 10.0, 0.5, 1.0), (5.0, 0.1, 3.0, 1e4)])
def test_grid_doubling(p, tau, y, gw):
    m1, v1 = oracle_rician_posterior(p, tau, y, gw)
    m2, v2 = oracle_rician_posterior(p, tau, y, gw, QuadratureSpec(4000, 1024))
    assert abs(m1 - m2) < 1e-8
    assert abs(v1 - v2) < 1e-8


def test_quadrature_spec_minimum():
    with pytest.raises(ValueError):
        QuadratureSpec(radial_points=10)


def test_nmse_grid_identity_bound():
    x = np.random.default_rng(0).standard_normal(20) + 0j
    assert oracle_nmse_grid(x, x, 1000) <= (np.pi / 1000) ** 2


def test_nmse_grid_orthogonal():
    assert oracle_nmse_grid([1, 0], [0, 1], 1000) == pytest.approx(2.0, abs=1e-14)


def test_nmse_grid_minimum_points():
    with pytest.raises(ValueError):
        oracle_nmse_grid([1.0], [1.0], 10)
