"""Block-structured propagation for segments where some atoms are undriven.

During any single pulse segment only a few atoms are driven. Every other
atom (a *spectator*) only enters the Hamiltonian through diagonal energy
shifts, so the Hamiltonian is block diagonal over spectator basis states
``s`` and many blocks are numerically identical. Writing an operator as
``X = sum_{s,s'} |s><s'| (x) X_{ss'}``:

* each pair block ``X_{ss'}`` evolves under its own small generator that
  depends only on the *types* of ``s`` and ``s'``;
* jump operators acting on driven atoms stay inside a pair block;
* jump operators acting on a spectator move weight from pair ``(s1, s1')``
  to ``(s2, s2')`` without touching the driven-atom indices.

Spectator jumps form a directed acyclic graph (decay only goes down), so
the exact solution is a finite sum over jump paths. For many simultaneous
inputs the propagators of every distinct sequence of pair types (a
*chain*) are integrated once and then applied to all inputs; for one input
the pair blocks are integrated directly.

Each type is integrated in the interaction frame of its own static
diagonal, which removes the large Rydberg shifts from the right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Unsupported(Exception):
    """The segment or channel set does not have the required structure."""


def _digits(dims: tuple[int, ...]) -> np.ndarray:
    """Per-atom level indices of every basis index, shape (n_atoms, N)."""
    return np.array(np.unravel_index(np.arange(int(np.prod(dims))), dims))


def active_atoms(h, extra_ops=()) -> tuple[int, ...]:
    """Atoms whose level can change under ``h`` (and any ``extra_ops``)."""
    dims = h.dims
    if len(dims) == 1:
        return (0,)
    digits = _digits(dims)
    static_off = h.static - np.diag(np.diag(h.static))
    changed = np.zeros(len(dims), dtype=bool)
    for op in (static_off, *h.operators, *extra_ops):
        rows, cols = np.nonzero(op)
        if rows.size:
            changed |= np.any(digits[:, rows] != digits[:, cols], axis=1)
    return tuple(int(i) for i in np.flatnonzero(changed))


def _round_key(*arrays, scale: float) -> bytes:
    parts = []
    for a in arrays:
        a = np.asarray(a, dtype=complex) / scale
        parts.append(np.round(a.real, 11).tobytes())
        parts.append(np.round(a.imag, 11).tobytes())
    return b"|".join(parts)


@dataclass
class BlockStructure:
    """Decomposition of one segment into spectator blocks.

    Attributes
    ----------
    index : ndarray (NS, q)
        Full-space index of (spectator state, driven-atom state).
    block_type : ndarray (NS,)
        Type label of each spectator state.
    static, ops, diag : ndarray
        Per-type static block, drive-operator blocks and frame energies.
    kappa : ndarray (n_types,)
        Total spectator decay rate out of a state of that type.
    jumps : ndarray (J, q, q)
        Jump operators acting on the driven atoms.
    moves : list of (src, dst, amp) arrays
        For each spectator jump operator, which spectator states it maps
        where and with which amplitude.
    """

    h: object
    active: tuple[int, ...]
    index: np.ndarray
    block_type: np.ndarray
    static: np.ndarray
    ops: np.ndarray
    diag: np.ndarray
    kappa: np.ndarray
    jumps: np.ndarray
    moves: list

    @property
    def q(self) -> int:
        return self.index.shape[1]

    @property
    def n_spectator(self) -> int:
        return self.index.shape[0]

    @property
    def n_types(self) -> int:
        return self.static.shape[0]

    # -- per-time operators in each type's frame ------------------------------

    def phases(self, t: float) -> np.ndarray:
        d = self.diag
        return np.exp(1j * t * (d[:, :, None] - d[:, None, :]))

    # -- compiled-kernel inputs --------------------------------------------------

    def prepare(self) -> None:
        """Precompute the packed arrays used by :mod:`rydgate._kernels`."""
        from . import _kernels

        q = self.q
        self.table = _kernels.coefficient_table(self.h.terms)
        j = self.jumps
        self.kmat = np.einsum("jba,jbc->ac", j.conj(), j) if j.shape[0] else np.zeros((q, q), complex)
        pattern = np.zeros((q, q), dtype=bool)
        pattern |= np.any(self.static != 0, axis=0)
        if self.ops.size:
            nz = np.any(self.ops != 0, axis=(0, 1))
            pattern |= nz | nz.T
        pattern |= self.kmat != 0
        pattern |= np.eye(q, dtype=bool)
        self.h_rows, self.h_cols = (a.astype(np.int64) for a in np.nonzero(pattern))
        ji, jr, jc = np.nonzero(j) if j.shape[0] else (np.zeros(0, int),) * 3
        self.j_idx, self.j_rows, self.j_cols = (a.astype(np.int64) for a in (ji, jr, jc))
        self.ops_c = np.ascontiguousarray(self.ops, dtype=complex).reshape(self.n_types, -1, q, q)
        self.jumps_c = np.ascontiguousarray(j, dtype=complex)

    def generators(self, t: float):
        """Framed non-Hermitian type Hamiltonians and jumps at time ``t``."""
        from . import _kernels

        cf = _kernels.coefficients(t, self.table) if self.table is not None \
            else self.h.coefficients(t)
        return _kernels.type_generators(
            t, cf, self.static, self.ops_c, self.diag, self.kmat,
            self.kappa, self.jumps_c,
        )

    # -- permutations -----------------------------------------------------------

    def to_blocks(self, x: np.ndarray) -> np.ndarray:
        """(n, N, N) -> (n, NS, NS, q, q)."""
        flat = self.index.reshape(-1)
        y = x[:, flat[:, None], flat[None, :]]
        ns, q = self.index.shape
        return y.reshape(x.shape[0], ns, q, ns, q).transpose(0, 1, 3, 2, 4)

    def from_blocks(self, y: np.ndarray) -> np.ndarray:
        n, ns = y.shape[:2]
        q = self.q
        flat = self.index.reshape(-1)
        z = y.transpose(0, 1, 3, 2, 4).reshape(n, ns * q, ns * q)
        out = np.empty_like(z)
        out[:, flat[:, None], flat[None, :]] = z
        return out

    def lab_phases(self, t: float) -> np.ndarray:
        """Per spectator state, exp(-i D t) returning from the frame."""
        return np.exp(-1j * t * self.diag[self.block_type])


def analyse(h, channels=(), frame: bool = True) -> BlockStructure:
    """Split ``h`` and ``channels`` into spectator blocks.

    Raises
    ------
    Unsupported
        If a channel lacks single-atom information, acts on a spectator
        in a non-monomial way, or maps a spectator state to itself.
    """
    dims = tuple(h.dims)
    if len(dims) < 2:
        raise Unsupported("no tensor structure")
    act = active_atoms(h)
    spec = tuple(i for i in range(len(dims)) if i not in act)
    digits = _digits(dims)
    s_dims = tuple(dims[i] for i in spec) or (1,)
    a_dims = tuple(dims[i] for i in act) or (1,)
    s_code = np.ravel_multi_index(digits[list(spec)], s_dims) if spec else np.zeros(digits.shape[1], int)
    a_code = np.ravel_multi_index(digits[list(act)], a_dims) if act else np.zeros(digits.shape[1], int)
    ns, q = int(np.prod(s_dims)), int(np.prod(a_dims))
    index = np.empty((ns, q), dtype=int)
    index[s_code, a_code] = np.arange(digits.shape[1])

    static_b = h.static[index[:, :, None], index[:, None, :]]
    ops_b = h.operators[:, index[:, :, None], index[:, None, :]] if h.operators.size else \
        np.zeros((0, ns, q, q), complex)
    ops_b = np.moveaxis(ops_b, 0, 1)  # (NS, K, q, q)

    # channels
    jumps, moves = [], []
    kappa_s = np.zeros(ns)
    spec_digits = np.array(np.unravel_index(np.arange(ns), s_dims)) if spec else np.zeros((0, 1), int)
    for ch in channels:
        if ch.atom is None or ch.local is None:
            raise Unsupported("channel without single-atom structure")
        if not np.any(ch.local):
            continue
        if ch.atom in act:
            mats = [np.eye(dims[i], dtype=complex) for i in act]
            mats[act.index(ch.atom)] = ch.local
            a = np.ones((1, 1), complex)
            for m in mats:
                a = np.kron(a, m)
            jumps.append(a)
            continue
        local = np.asarray(ch.local)
        if np.any(np.count_nonzero(local, axis=0) > 1) or np.any(np.count_nonzero(local, axis=1) > 1):
            raise Unsupported("spectator channel is not monomial")
        pos = spec.index(ch.atom)
        src, dst, amp = [], [], []
        for s in range(ns):
            lvl = spec_digits[pos, s]
            col = np.flatnonzero(local[:, lvl])
            if col.size == 0:
                continue
            d = spec_digits[:, s].copy()
            d[pos] = col[0]
            dcode = int(np.ravel_multi_index(d, s_dims))
            if dcode == s:
                raise Unsupported("spectator channel with a fixed point")
            src.append(s)
            dst.append(dcode)
            amp.append(local[col[0], lvl])
            kappa_s[s] += abs(local[col[0], lvl]) ** 2
        if src:
            moves.append((np.array(src), np.array(dst), np.array(amp, dtype=complex)))

    scale = max(np.abs(h.static).max(initial=0.0), np.abs(h.operators).max(initial=0.0), 1.0)
    kscale = max(kappa_s.max(initial=0.0), 1.0)
    keys: dict[bytes, int] = {}
    block_type = np.empty(ns, dtype=int)
    for s in range(ns):
        key = _round_key(static_b[s], ops_b[s], scale=scale) + _round_key([kappa_s[s]], scale=kscale)
        block_type[s] = keys.setdefault(key, len(keys))
    first = np.array([np.flatnonzero(block_type == t)[0] for t in range(len(keys))])
    static_t = static_b[first].astype(complex)
    diag = np.real(np.diagonal(static_t, axis1=1, axis2=2)).copy() if frame else np.zeros((len(first), q))
    return BlockStructure(
        h=h,
        active=act,
        index=index,
        block_type=block_type,
        static=static_t,
        ops=ops_b[first],
        diag=diag,
        kappa=kappa_s[first],
        jumps=np.array(jumps) if jumps else np.zeros((0, q, q), complex),
        moves=moves,
    )


# --- pair graph ----------------------------------------------------------------


@dataclass
class PairGraph:
    """Edges between pair blocks generated by spectator jumps."""

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray


def pair_graph(bs: BlockStructure) -> PairGraph:
    ns = bs.n_spectator
    src, dst, w = [], [], []
    for s_idx, d_idx, amp in bs.moves:
        # all pairs (s, s') with both sources in this channel
        a = np.repeat(np.arange(len(s_idx)), len(s_idx))
        b = np.tile(np.arange(len(s_idx)), len(s_idx))
        src.append(s_idx[a] * ns + s_idx[b])
        dst.append(d_idx[a] * ns + d_idx[b])
        w.append(amp[a] * np.conj(amp[b]))
    if not src:
        z = np.zeros(0, int)
        return PairGraph(z, z, np.zeros(0, complex))
    return PairGraph(np.concatenate(src), np.concatenate(dst), np.concatenate(w))


@dataclass
class Chains:
    """Distinct sequences of pair types reachable by spectator jumps.

    ``left``/``right`` give the types of the final pair of each chain and
    ``parent`` the chain it extends (-1 for length one). ``apply`` holds,
    per chain, the (source pair, end pair, weight) triples it contributes.
    """

    left: np.ndarray
    right: np.ndarray
    parent: np.ndarray
    apply: list


def enumerate_chains(bs: BlockStructure, graph: PairGraph, max_depth: int = 64) -> Chains:
    ns = bs.n_spectator
    bt = bs.block_type
    n_pairs = ns * ns
    out_edges: list[list[tuple[int, complex]]] = [[] for _ in range(n_pairs)]
    for s, d, w in zip(graph.src, graph.dst, graph.weight):
        out_edges[s].append((int(d), complex(w)))

    keys: dict[tuple, int] = {}
    left, right, parent = [], [], []
    apply: list[list] = []

    def chain_id(key, par):
        cid = keys.get(key)
        if cid is None:
            cid = len(keys)
            keys[key] = cid
            left.append(key[-1][0])
            right.append(key[-1][1])
            parent.append(par)
            apply.append([])
        return cid

    for p0 in range(n_pairs):
        t0 = (int(bt[p0 // ns]), int(bt[p0 % ns]))
        stack = [(p0, (t0,), 1.0 + 0j, -1)]
        while stack:
            p, key, w, par = stack.pop()
            if len(key) > max_depth:
                raise Unsupported("spectator jump graph is not acyclic")
            cid = chain_id(key, par)
            apply[cid].append((p0, p, w))
            for d, ew in out_edges[p]:
                td = (int(bt[d // ns]), int(bt[d % ns]))
                stack.append((d, key + (td,), w * ew, cid))

    packed = []
    for rows in apply:
        arr = np.array(rows, dtype=complex)
        packed.append((arr[:, 0].real.astype(int), arr[:, 1].real.astype(int), arr[:, 2]))
    return Chains(np.array(left), np.array(right), np.array(parent), packed)
