"""Level schemes, composite spaces and embedded operators.

Tensor order follows the atom list, controls first and the target last, so
a basis label such as ``"11A"`` reads control 1, control 2, target.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .linalg import MAX_DIM, PAULIS, SizeError, ShapeError, as_matrix


class Role(enum.Enum):
    CONTROL = "control"
    TARGET = "target"


@dataclass(frozen=True)
class LevelScheme:
    """Ordered internal levels of one atom.

    Controls carry ``(g0, g1, r)`` and the target ``(A, B, e, R)``. The
    ``symbols`` are the one-character names used in basis labels.
    """

    role: Role
    labels: tuple[str, ...]
    symbols: tuple[str, ...]
    qubit_levels: tuple[str, str]

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, level: str) -> int:
        """Position of ``level`` given either its label or its symbol."""
        if level in self.labels:
            return self.labels.index(level)
        if level in self.symbols:
            return self.symbols.index(level)
        raise KeyError(f"unknown level {level!r} for {self.role.value} atom")

    def projector(self, level: str) -> np.ndarray:
        m = np.zeros((self.dim, self.dim), dtype=complex)
        i = self.index(level)
        m[i, i] = 1.0
        return m

    def transition(self, ket: str, bra: str) -> np.ndarray:
        """Local matrix unit ``|ket><bra|``."""
        m = np.zeros((self.dim, self.dim), dtype=complex)
        m[self.index(ket), self.index(bra)] = 1.0
        return m


CONTROL = LevelScheme(Role.CONTROL, ("g0", "g1", "r"), ("0", "1", "r"), ("g0", "g1"))
TARGET = LevelScheme(Role.TARGET, ("A", "B", "e", "R"), ("A", "B", "e", "R"), ("A", "B"))


@dataclass(frozen=True)
class LocalOperator:
    """A matrix acting on a single atom's local space."""

    atom_index: int
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix))


@dataclass(frozen=True)
class SystemLayout:
    """Ordered collection of atoms defining the composite Hilbert space.

    Parameters
    ----------
    schemes : tuple of LevelScheme
        One entry per atom in tensor-product order. Exactly one must be a
        target.
    """

    schemes: tuple[LevelScheme, ...]
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        roles = [s.role for s in self.schemes]
        if roles.count(Role.TARGET) != 1:
            raise ValueError("layout needs exactly one target atom")
        if self.dim > MAX_DIM:
            raise SizeError(f"layout dimension {self.dim} exceeds cap {MAX_DIM}")

    @classmethod
    def with_controls(cls, n_controls: int) -> "SystemLayout":
        if n_controls < 1:
            raise ValueError("need at least one control atom")
        return cls(tuple([CONTROL] * n_controls + [TARGET]))

    @property
    def n_atoms(self) -> int:
        return len(self.schemes)

    @property
    def n_controls(self) -> int:
        return self.n_atoms - 1

    @property
    def target_index(self) -> int:
        return next(i for i, s in enumerate(self.schemes) if s.role is Role.TARGET)

    @property
    def control_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.schemes) if s.role is Role.CONTROL)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.schemes)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @cached_property
    def labels(self) -> tuple[str, ...]:
        """Basis-state labels in index order, e.g. ``"01A"``."""
        return tuple(
            "".join(combo)
            for combo in itertools.product(*(s.symbols for s in self.schemes))
        )

    def index_of(self, label: str) -> int:
        """Basis index for a label such as ``"11A"`` or ``"rrB"``."""
        if len(label) != self.n_atoms:
            raise ValueError(f"label {label!r} needs {self.n_atoms} characters")
        idx = 0
        for ch, s in zip(label, self.schemes):
            idx = idx * s.dim + s.index(ch)
        return idx

    def digits(self, index: int) -> tuple[int, ...]:
        """Per-atom level indices of a basis index."""
        return tuple(int(x) for x in np.unravel_index(index, self.dims))

    def basis_state(self, label: str) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index_of(label)] = 1.0
        return v


def embed(layout: SystemLayout, ops) -> np.ndarray:
    """Tensor the given local operators with identities on the other atoms.

    Raises
    ------
    ValueError
        If an atom index appears twice or is out of range.
    ShapeError
        If a local matrix does not match its atom's dimension.
    """
    by_atom: dict[int, np.ndarray] = {}
    for op in ops:
        if op.atom_index in by_atom:
            raise ValueError(f"duplicate operator for atom {op.atom_index}")
        if not 0 <= op.atom_index < layout.n_atoms:
            raise ValueError(f"atom index {op.atom_index} out of range")
        d = layout.schemes[op.atom_index].dim
        if op.matrix.shape != (d, d):
            raise ShapeError(
                f"atom {op.atom_index} expects {d}x{d}, got {op.matrix.shape}"
            )
        by_atom[op.atom_index] = op.matrix
    out = np.ones((1, 1), dtype=complex)
    for i, s in enumerate(layout.schemes):
        out = np.kron(out, by_atom.get(i, np.eye(s.dim, dtype=complex)))
    return out


def embed_local(layout: SystemLayout, atom: int, matrix) -> np.ndarray:
    """Shorthand for embedding a single local operator."""
    return embed(layout, [LocalOperator(atom, matrix)])


def computational_indices(layout: SystemLayout) -> np.ndarray:
    """Full-space indices of the qubit subspace in lexicographic qubit order.

    Position ``k`` holds the basis index of the computational state whose
    bit string is ``k`` written in binary with the first atom most
    significant.
    """
    key = "computational_indices"
    if key not in layout._cache:
        per_atom = [
            [s.index(q) for q in s.qubit_levels] for s in layout.schemes
        ]
        idx = [
            int(np.ravel_multi_index(combo, layout.dims))
            for combo in itertools.product(*per_atom)
        ]
        layout._cache[key] = np.array(idx, dtype=int)
    return layout._cache[key]


def computational_projector(layout: SystemLayout) -> np.ndarray:
    """Orthogonal projector onto the 2^N-dimensional qubit subspace."""
    p = np.zeros((layout.dim, layout.dim), dtype=complex)
    idx = computational_indices(layout)
    p[idx, idx] = 1.0
    return p


def pauli_strings(n_qubits: int) -> list[str]:
    """Labels ``"IIX"`` etc. matching :func:`pauli_basis` order."""
    return ["".join(c) for c in itertools.product("IXYZ", repeat=n_qubits)]


def pauli_basis(n_qubits: int) -> np.ndarray:
    """All 4^n Pauli products on n qubits, shape ``(4**n, 2**n, 2**n)``.

    The order is lexicographic in (I, X, Y, Z) with the first qubit most
    significant, so index 0 is the identity.
    """
    out = []
    for combo in itertools.product(PAULIS, repeat=n_qubits):
        m = np.ones((1, 1), dtype=complex)
        for p in combo:
            m = np.kron(m, p)
        out.append(m)
    return np.array(out)


def embed_computational(layout: SystemLayout, ops: np.ndarray) -> np.ndarray:
    """Place qubit-space operators (..., d, d) into the full space."""
    idx = computational_indices(layout)
    ops = np.asarray(ops, dtype=complex)
    out = np.zeros(ops.shape[:-2] + (layout.dim, layout.dim), dtype=complex)
    out[..., idx[:, None], idx[None, :]] = ops
    return out


def restrict_computational(layout: SystemLayout, ops: np.ndarray) -> np.ndarray:
    """Compress full-space operators (..., N, N) to the qubit subspace, P X P."""
    idx = computational_indices(layout)
    return np.asarray(ops)[..., idx[:, None], idx[None, :]]


def embedded_pauli_basis(layout: SystemLayout) -> list[np.ndarray]:
    """Pauli products on the per-atom qubit levels, zero elsewhere."""
    return list(embed_computational(layout, pauli_basis(layout.n_atoms)))
