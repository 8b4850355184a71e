"""Dense complex-matrix helpers shared by the rest of the package."""

from __future__ import annotations

import numpy as np
import scipy.linalg

#: Largest matrix dimension the helpers will build. The biggest system
#: (three controls plus a target) is 108-dimensional and its Liouville
#: space is 11664-dimensional, so this leaves headroom without letting a
#: typo allocate gigabytes.
MAX_DIM = 16384


class ShapeError(ValueError):
    """Raised when operands have incompatible shapes."""


class SizeError(ValueError):
    """Raised when a result would exceed :data:`MAX_DIM`."""


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _require_square(m: np.ndarray, name: str = "matrix") -> None:
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")


def kron(a, b, *more, max_dim: int = MAX_DIM) -> np.ndarray:
    """Kronecker product of two or more matrices.

    Entry ``(i*rows_b + k, j*cols_b + l)`` of the result is ``a[i, j] * b[k, l]``.

    Raises
    ------
    SizeError
        If either dimension of the result exceeds ``max_dim``.
    """
    out = as_matrix(a)
    for m in (b, *more):
        m = as_matrix(m)
        rows = out.shape[0] * m.shape[0]
        cols = out.shape[1] * m.shape[1]
        if rows > max_dim or cols > max_dim:
            raise SizeError(f"kron result {rows}x{cols} exceeds cap {max_dim}")
        out = np.kron(out, m)
    return out


def expm(a) -> np.ndarray:
    """Matrix exponential (Padé scaling-and-squaring)."""
    m = as_matrix(a)
    _require_square(m)
    return scipy.linalg.expm(m)


def dagger(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_matrix(a).conj().T


def commutator(a, b) -> np.ndarray:
    """Return ``ab - ba``."""
    a = as_matrix(a)
    b = as_matrix(b)
    _require_square(a, "a")
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return a @ b - b @ a


def trace(a) -> complex:
    """Matrix trace as a Python complex."""
    m = as_matrix(a)
    _require_square(m)
    return complex(np.trace(m))


def is_hermitian(a, atol: float = 1e-12) -> bool:
    m = as_matrix(a)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T), initial=0.0) <= atol


def is_unitary(a, atol: float = 1e-10) -> bool:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= atol


def ket(dim: int, index: int) -> np.ndarray:
    """Computational basis vector ``|index>`` of length ``dim``."""
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def outer(dim: int, i: int, j: int) -> np.ndarray:
    """Matrix unit ``|i><j|``."""
    m = np.zeros((dim, dim), dtype=complex)
    m[i, j] = 1.0
    return m


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)
