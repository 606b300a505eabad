"""Dense Hermitian linear algebra.

Every operator in the package (effects, states, SDP coefficient blocks) is a
:class:`HermitianOperator`. Instances are immutable; arithmetic returns new
operators.
"""

from __future__ import annotations

from typing import Any, Iterable

import numpy as np

HERMITIAN_REJECT_TOL = 1e-8


class NumericalFailure(RuntimeError):
    """Raised when a dense factorization does not converge."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class HermitianOperator:
    """An immutable d x d complex Hermitian matrix.

    The input is symmetrized as ``(A + A^H) / 2``. Inputs whose
    anti-Hermitian part exceeds ``1e-8 * ||A||_F`` are rejected instead, since
    that almost always means the caller built the wrong matrix.
    """

    __slots__ = ("_data",)

    def __init__(self, entries: Any):
        a = np.array(entries, dtype=complex)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator entries must be finite")
        norm = np.linalg.norm(a)
        skew = np.linalg.norm(a - a.conj().T)
        if skew > HERMITIAN_REJECT_TOL * max(norm, 1e-300):
            raise ValueError(
                f"matrix is not Hermitian: ||A - A^H||_F = {skew:.3e} "
                f"(||A||_F = {norm:.3e})"
            )
        a = 0.5 * (a + a.conj().T)
        a.setflags(write=False)
        self._data = a

    @classmethod
    def identity(cls, dim: int) -> HermitianOperator:
        return cls(np.eye(dim))

    @classmethod
    def diag(cls, values: Iterable[float]) -> HermitianOperator:
        return cls(np.diag(np.asarray(list(values), dtype=float)))

    @classmethod
    def projector(cls, vector: Any) -> HermitianOperator:
        v = np.asarray(vector, dtype=complex).ravel()
        return cls(np.outer(v, v.conj()))

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the entries."""
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    def trace(self) -> float:
        return float(np.trace(self._data).real)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data.copy()
        return self._data.astype(dtype)

    def __add__(self, other: HermitianOperator) -> HermitianOperator:
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        _check_same_dim(self, other)
        return HermitianOperator(self._data + other._data)

    def __sub__(self, other: HermitianOperator) -> HermitianOperator:
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        _check_same_dim(self, other)
        return HermitianOperator(self._data - other._data)

    def __mul__(self, scalar: float) -> HermitianOperator:
        if isinstance(scalar, complex) and scalar.imag != 0:
            raise TypeError("Hermitian operators only scale by real numbers")
        return HermitianOperator(float(np.real(scalar)) * self._data)

    __rmul__ = __mul__

    def __neg__(self) -> HermitianOperator:
        return HermitianOperator(-self._data)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self._data, other._data))

    def __hash__(self) -> int:
        return hash(self._data.tobytes())

    def allclose(self, other: HermitianOperator, atol: float = 1e-10) -> bool:
        return self.dim == other.dim and bool(
            np.linalg.norm(self._data - other._data) <= atol
        )

    def __repr__(self) -> str:
        return f"HermitianOperator(dim={self.dim})"

    def to_literal(self) -> dict:
        """Config literal ``{"re": [[...]], "im": [[...]]}`` (row-major)."""
        return {"re": self._data.real.tolist(), "im": self._data.imag.tolist()}

    @classmethod
    def from_literal(cls, literal: dict) -> HermitianOperator:
        if not isinstance(literal, dict) or "re" not in literal:
            raise ValueError('operator literal must be an object with "re" (and optional "im")')
        re = np.asarray(literal["re"], dtype=float)
        im = np.asarray(literal.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise ValueError(f"re/im shape mismatch: {re.shape} vs {im.shape}")
        return cls(re + 1j * im)


def _check_same_dim(a: HermitianOperator, b: HermitianOperator) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def hermitian_eig(a: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvector matrix of ``a``."""
    try:
        w, v = np.linalg.eigh(a.data)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Hermitian eigensolver did not converge: {exc}") from exc
    residual = np.linalg.norm(v @ np.diag(w) @ v.conj().T - a.data)
    if residual > 1e-9 * max(1.0, np.linalg.norm(a.data)):
        raise NumericalFailure("eigendecomposition residual too large", residual)
    return w, v


def min_eigenvalue(a: HermitianOperator) -> float:
    return float(np.linalg.eigvalsh(a.data)[0])


def is_psd(a: HermitianOperator, tol: float = 1e-10) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return min_eigenvalue(a) >= -tol


def frobenius_inner(a: HermitianOperator, b: HermitianOperator) -> float:
    """Tr[A B], which is real for Hermitian arguments."""
    _check_same_dim(a, b)
    value = np.vdot(a.data, b.data)
    assert abs(value.imag) <= 1e-12 * max(1.0, abs(value.real)), value
    return float(value.real)


def hermitian_basis(dim: int) -> np.ndarray:
    """Orthonormal basis of d x d Hermitian matrices, shape (d*d, d, d).

    Ordering: diagonal units, then symmetric off-diagonal pairs, then
    antisymmetric imaginary pairs (upper triangle, row-major). Coordinates in
    this basis are the ``hvec`` coordinates used by the SDP layer.
    """
    basis = np.zeros((dim * dim, dim, dim), dtype=complex)
    k = 0
    for i in range(dim):
        basis[k, i, i] = 1.0
        k += 1
    s = 1.0 / np.sqrt(2.0)
    iu = list(zip(*np.triu_indices(dim, 1)))
    for i, j in iu:
        basis[k, i, j] = basis[k, j, i] = s
        k += 1
    for i, j in iu:
        basis[k, i, j] = -1j * s
        basis[k, j, i] = 1j * s
        k += 1
    return basis
