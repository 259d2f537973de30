"""Linear sensing operators with forward/adjoint application.

Only operators whose Gram matrix ``A^H A`` is diagonal are usable by the
solvers; for those, :meth:`SensingOperator.gram_diagonal` gives its diagonal
and :meth:`SensingOperator.row_gram_trace` evaluates ``Tr(A Diag(q) A^H)``
without touching ``A`` itself.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from .core import CapabilityError, ComplexVector, DimensionError, RngHandle


class SensingOperator(ABC):
    """Abstract linear map ``C^N -> C^Mbar``.

    Subclasses implement :meth:`_apply` and :meth:`_adjoint`; dimension checks
    happen here.  ``calls`` counts forward and adjoint applications, which
    the solvers' cost claims are tested against.
    """

    diagonal_gram: bool = False

    def __init__(self, input_dim: int, output_dim: int):
        if input_dim <= 0 or output_dim <= 0:
            raise DimensionError(f"operator dimensions must be positive, got {output_dim}x{input_dim}")
        self.input_dim = int(input_dim)
        self.output_dim = int(output_dim)
        self.calls = {"apply": 0, "adjoint": 0}

    @property
    def shape(self) -> tuple[int, int]:
        return (self.output_dim, self.input_dim)

    def apply(self, x) -> ComplexVector:
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != (self.input_dim,):
            raise DimensionError(f"apply expects shape ({self.input_dim},), got {x.shape}")
        self.calls["apply"] += 1
        return self._apply(x)

    def adjoint(self, u) -> ComplexVector:
        u = np.asarray(u, dtype=np.complex128)
        if u.shape != (self.output_dim,):
            raise DimensionError(f"adjoint expects shape ({self.output_dim},), got {u.shape}")
        self.calls["adjoint"] += 1
        return self._adjoint(u)

    def reset_counters(self):
        self.calls = {"apply": 0, "adjoint": 0}

    @abstractmethod
    def _apply(self, x: ComplexVector) -> ComplexVector: ...

    @abstractmethod
    def _adjoint(self, u: ComplexVector) -> ComplexVector: ...

    def gram_diagonal(self) -> np.ndarray:
        """``diag(A^H A)`` as a real vector of length N."""
        if not self.diagonal_gram:
            raise CapabilityError(f"{type(self).__name__} has no diagonal Gram matrix")
        return self._gram_diagonal()

    def _gram_diagonal(self) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} has no diagonal Gram matrix")

    def row_gram_trace(self, q) -> float:
        """``Tr(A Diag(q) A^H)``, equal to ``sum(q * diag(A^H A))`` here."""
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.input_dim,):
            raise DimensionError(f"q must have shape ({self.input_dim},), got {q.shape}")
        return float(np.dot(q, self.gram_diagonal()))


class DenseOperator(SensingOperator):
    """Explicit matrix.  Intended for tests and small problems.

    ``diagonal_gram`` is detected from the matrix unless given.
    """

    def __init__(self, matrix, diagonal_gram: bool | None = None):
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2:
            raise DimensionError(f"matrix must be 2-d, got shape {matrix.shape}")
        super().__init__(matrix.shape[1], matrix.shape[0])
        self.matrix = matrix
        self.matrix.flags.writeable = False
        gram = matrix.conj().T @ matrix
        self._gram = np.real(np.diag(gram)).copy()
        if diagonal_gram is None:
            off = gram - np.diag(np.diag(gram))
            scale = max(np.max(np.abs(gram)), 1.0)
            diagonal_gram = bool(np.max(np.abs(off), initial=0.0) <= 1e-10 * scale)
        self.diagonal_gram = diagonal_gram

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, u):
        return self.matrix.conj().T @ u

    def _gram_diagonal(self):
        return self._gram


class HaarOperator(DenseOperator):
    """Dense ``Mbar x N`` matrix with orthonormal columns, ``A^H A = I``."""

    diagonal_gram = True

    def __init__(self, matrix):
        super().__init__(matrix, diagonal_gram=True)
        self._ones = np.ones(self.input_dim)

    def _gram_diagonal(self):
        return self._ones


class CodedDiffractionOperator(SensingOperator):
    """Random phase mask followed by the unitary 2-d DFT.

    Images of shape ``(height, width)`` are flattened row-major.  Each
    :meth:`apply` and :meth:`adjoint` costs exactly one FFT, counted in
    ``calls``.
    """

    diagonal_gram = True

    def __init__(self, height: int, width: int, phases):
        n = int(height) * int(width)
        super().__init__(n, n)
        self.height = int(height)
        self.width = int(width)
        phases = np.asarray(phases, dtype=np.float64)
        if phases.shape != (n,):
            raise DimensionError(f"mask phases must have shape ({n},), got {phases.shape}")
        self.phases = phases
        self.mask = np.exp(1j * phases).reshape(self.height, self.width)
        self._ones = np.ones(n)

    def _apply(self, x):
        img = x.reshape(self.height, self.width)
        return np.fft.fft2(self.mask * img, norm="ortho").ravel()

    def _adjoint(self, u):
        img = np.fft.ifft2(u.reshape(self.height, self.width), norm="ortho")
        return (np.conj(self.mask) * img).ravel()

    def _gram_diagonal(self):
        return self._ones


class StackedOperator(SensingOperator):
    """Vertical concatenation of operators sharing one input space."""

    def __init__(self, blocks: Sequence[SensingOperator]):
        blocks = list(blocks)
        if not blocks:
            raise DimensionError("need at least one block")
        n = blocks[0].input_dim
        if any(b.input_dim != n for b in blocks):
            raise DimensionError("stacked blocks must share the input dimension")
        super().__init__(n, sum(b.output_dim for b in blocks))
        self.blocks = blocks
        self.diagonal_gram = all(b.diagonal_gram for b in blocks)
        self._splits = np.cumsum([b.output_dim for b in blocks])[:-1]

    def _apply(self, x):
        return np.concatenate([b.apply(x) for b in self.blocks])

    def _adjoint(self, u):
        parts = np.split(u, self._splits)
        out = self.blocks[0].adjoint(parts[0])
        for b, part in zip(self.blocks[1:], parts[1:]):
            out = out + b.adjoint(part)
        return out

    def _gram_diagonal(self):
        out = self.blocks[0].gram_diagonal()
        for b in self.blocks[1:]:
            out = out + b.gram_diagonal()
        return out


def sample_haar_columns(m: int, n: int, rng: RngHandle) -> HaarOperator:
    """Haar-distributed ``m x n`` matrix with orthonormal columns.

    QR of a complex Ginibre matrix, with the columns of Q rotated by the
    phases of ``diag(R)`` so the result does not depend on the QR
    convention.
    """
    if n <= 0 or m < n:
        raise DimensionError(f"need m >= n > 0, got m={m}, n={n}")
    g = rng.generator.standard_normal((2, m, n))
    z = (g[0] + 1j * g[1]) / np.sqrt(2.0)
    q, r = np.linalg.qr(z, mode="reduced")
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return HaarOperator(q)


def sample_cdp_operators(h: int, w: int, L: int, rng: RngHandle) -> list[CodedDiffractionOperator]:
    """``L`` coded-diffraction operators with i.i.d. uniform mask phases."""
    if h <= 0 or w <= 0 or L < 1:
        raise DimensionError(f"invalid CDP dimensions h={h}, w={w}, L={L}")
    gen = rng.generator
    return [CodedDiffractionOperator(h, w, gen.uniform(0.0, 2 * np.pi, size=h * w)) for _ in range(L)]
