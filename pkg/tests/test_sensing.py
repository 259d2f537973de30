import numpy as np
import pytest

from stovamp.core import CapabilityError, DimensionError, RngHandle, sample_standard_complex_gaussian
from stovamp.sensing import (
    CodedDiffractionOperator,
    DenseOperator,
    StackedOperator,
    sample_cdp_operators,
    sample_haar_columns,
)


def crandn(n, gen):
    return (gen.standard_normal(n) + 1j * gen.standard_normal(n)) / np.sqrt(2)


def operators():
    rng = RngHandle(11)
    yield "haar", sample_haar_columns(40, 24, rng)
    yield "cdp", sample_cdp_operators(8, 6, 1, rng)[0]
    yield "dense", DenseOperator(crandn(30 * 20, rng.generator).reshape(30, 20))
    yield "stacked", StackedOperator(sample_cdp_operators(4, 4, 3, rng))


@pytest.mark.parametrize("name,op", list(operators()))
def test_adjoint_consistency(name, op):
    gen = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        x = crandn(op.input_dim, gen)
        u = crandn(op.output_dim, gen)
        ax = op.apply(x)
        lhs = np.vdot(u, ax)  # <Ax, u>
        rhs = np.vdot(op.adjoint(u), x)  # <x, A^H u>
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(ax) * np.linalg.norm(u)))
    assert worst < 1e-10


def test_cdp_parseval_and_inverse():
    gen = np.random.default_rng(1)
    op = sample_cdp_operators(16, 12, 1, RngHandle(4))[0]
    for _ in range(20):
        x = crandn(op.input_dim, gen)
        z = op.apply(x)
        assert np.linalg.norm(z) == pytest.approx(np.linalg.norm(x), rel=1e-10)
        np.testing.assert_allclose(op.adjoint(z), x, atol=1e-10)


def test_cdp_impulse_has_flat_spectrum():
    op = sample_cdp_operators(8, 8, 1, RngHandle(5))[0]
    x = np.zeros(64, dtype=complex)
    x[0] = 1.0
    np.testing.assert_allclose(np.abs(op.apply(x)), 1 / 8, atol=1e-12)


def test_cdp_counts_one_fft_per_call():
    op = sample_cdp_operators(4, 4, 1, RngHandle(0))[0]
    op.apply(np.ones(16))
    op.adjoint(np.ones(16))
    op.adjoint(np.ones(16))
    assert op.calls == {"apply": 1, "adjoint": 2}


def test_cdp_row_major_flattening():
    op = CodedDiffractionOperator(2, 3, np.zeros(6))
    img = np.arange(6.0).reshape(2, 3)
    expected = np.fft.fft2(img, norm="ortho").ravel()
    np.testing.assert_allclose(op.apply(img.ravel()), expected, atol=1e-12)


def test_haar_norm_preserving():
    op = sample_haar_columns(50, 30, RngHandle(2))
    x = sample_standard_complex_gaussian(30, RngHandle(3))
    assert np.linalg.norm(op.apply(x)) == pytest.approx(np.linalg.norm(x), rel=1e-10)
    np.testing.assert_allclose(op.adjoint(op.apply(x)), x, atol=1e-10)


def test_identity_operator():
    op = DenseOperator(np.eye(5))
    x = np.arange(5) + 1j
    np.testing.assert_array_equal(op.apply(x), x)


@pytest.mark.parametrize("m,n,seed", [(64, 64, 0), (100, 37, 1), (17, 3, 2), (1, 1, 3)])
def test_haar_gram_identity(m, n, seed):
    A = sample_haar_columns(m, n, RngHandle(seed)).matrix
    assert np.max(np.abs(A.conj().T @ A - np.eye(n))) < 1e-10


def test_haar_scalar_is_unit_modulus():
    A = sample_haar_columns(1, 1, RngHandle(9)).matrix
    assert abs(A[0, 0]) == pytest.approx(1.0, abs=1e-14)


def test_haar_rejects_wide():
    with pytest.raises(DimensionError):
        sample_haar_columns(3, 4, RngHandle(0))


def test_haar_first_entry_power():
    # |A_11|^2 of a uniform unit vector in C^64 is Beta(1, 63): mean 1/64
    vals = np.array([abs(sample_haar_columns(64, 1, RngHandle(s)).matrix[0, 0]) ** 2 for s in range(10_000)])
    se = np.sqrt((1 / 64) * (63 / 64) / 65) / np.sqrt(len(vals))
    assert abs(vals.mean() - 1 / 64) < 3 * se


def test_haar_column_rotation_invariance():
    # for a uniform unit vector, |entries|^2 of U v have the same law as of v
    n = 16
    vs = np.array([sample_haar_columns(n, 1, RngHandle(s)).matrix[:, 0] for s in range(4000)])
    U = sample_haar_columns(n, n, RngHandle(99_999)).matrix
    a = np.abs(vs) ** 2
    b = np.abs(vs @ U.T) ** 2
    # first two moments of Beta(1, n-1)
    for arr in (a, b):
        assert arr.mean() == pytest.approx(1 / n, rel=0.02)
        assert (arr**2).mean() == pytest.approx(2 / (n * (n + 1)), rel=0.05)


def test_haar_qr_phase_fix_removes_bias():
    # naive QR has a positive real diagonal of R; Haar has a uniform phase on A_11
    ph = np.array([np.angle(sample_haar_columns(4, 4, RngHandle(s)).matrix[0, 0]) for s in range(4000)])
    assert abs(np.mean(np.exp(1j * ph))) < 0.05


class TestGram:
    def test_haar_ones(self):
        np.testing.assert_array_equal(sample_haar_columns(10, 6, RngHandle(0)).gram_diagonal(), np.ones(6))

    def test_cdp_ones(self):
        np.testing.assert_array_equal(sample_cdp_operators(3, 5, 1, RngHandle(0))[0].gram_diagonal(), np.ones(15))

    def test_diagonal_operator(self):
        op = DenseOperator(np.diag([2.0, 3.0]))
        np.testing.assert_allclose(op.gram_diagonal(), [4.0, 9.0])
        assert op.row_gram_trace([1.0, 1.0]) == pytest.approx(13.0)

    def test_non_diagonal_raises(self):
        op = DenseOperator([[1.0, 1.0], [0.0, 1.0]])
        assert not op.diagonal_gram
        with pytest.raises(CapabilityError):
            op.gram_diagonal()
        with pytest.raises(CapabilityError):
            op.row_gram_trace([1.0, 1.0])

    @pytest.mark.parametrize("c", [0.5, 3.0])
    def test_trace_of_scaled_identity(self, c):
        cdp = sample_cdp_operators(4, 4, 1, RngHandle(0))[0]
        haar = sample_haar_columns(20, 12, RngHandle(0))
        assert cdp.row_gram_trace(np.full(16, c)) == pytest.approx(c * 16)
        assert haar.row_gram_trace(np.full(12, c)) == pytest.approx(c * 12)

    @pytest.mark.parametrize("kind", ["haar", "cdp", "diag", "stacked"])
    def test_trace_matches_dense(self, kind):
        gen = np.random.default_rng(3)
        if kind == "haar":
            op = sample_haar_columns(64, 40, RngHandle(1))
        elif kind == "cdp":
            op = sample_cdp_operators(8, 8, 1, RngHandle(1))[0]
        elif kind == "diag":
            op = DenseOperator(np.diag(gen.uniform(0.1, 3, 20)) + 0j)
        else:
            op = StackedOperator([sample_haar_columns(30, 20, RngHandle(i)) for i in range(2)])
        # dense matrix by probing the operator with unit vectors
        A = np.column_stack([op.apply(e) for e in np.eye(op.input_dim)])
        q = gen.uniform(0.1, 2.0, op.input_dim)
        brute = np.trace(A @ np.diag(q) @ A.conj().T).real
        assert op.row_gram_trace(q) == pytest.approx(brute, rel=1e-10)


def test_cdp_sampler():
    ops = sample_cdp_operators(256, 256, 3, RngHandle(0))
    assert len(ops) == 3
    assert all(op.input_dim == 65536 == op.output_dim for op in ops)
    assert not np.allclose(ops[0].phases, ops[1].phases)
    assert np.all((ops[0].phases >= 0) & (ops[0].phases < 2 * np.pi))


def test_dimension_checks():
    op = sample_haar_columns(6, 4, RngHandle(0))
    with pytest.raises(DimensionError):
        op.apply(np.ones(5))
    with pytest.raises(DimensionError):
        op.adjoint(np.ones(4))
