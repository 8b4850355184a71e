"""Time-ordered propagation of states and operators, with or without decay.

Two engines share the same contract:

``dense``
    Integrates the full matrix equation. Generic, used as the reference.
``blocks``
    Exploits spectator structure (see :mod:`rydgate._blocks`). Needs
    channels built by :func:`build_lindblad_channels` (or any channel
    that records its atom and local matrix).

``method="auto"`` picks ``blocks`` whenever the structure allows it.
Both integrate with DOP853 in the interaction frame of the static
diagonal by default (``frame="interaction"``); ``frame="lab"`` integrates
the Hamiltonian as written.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import _blocks, _kernels
from .hilbert import SystemLayout, TARGET, embed_local
from .params import ProtocolParams

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


class IntegrationError(RuntimeError):
    """Adaptive integration failed (typically step-size underflow)."""

    def __init__(self, segment: int, message: str):
        super().__init__(f"segment {segment}: {message}")
        self.segment = segment


@dataclass(frozen=True)
class LindbladChannel:
    """Jump operator with its rate folded in.

    ``atom`` and ``local`` are optional single-atom metadata that let the
    block engine treat the channel without inspecting the full matrix.
    """

    operator: np.ndarray
    atom: int | None = None
    local: np.ndarray | None = None
    label: str = ""


@dataclass
class QuantumState:
    """State vector or density matrix on a layout's composite space."""

    data: np.ndarray
    layout: SystemLayout | None = None

    @property
    def is_density(self) -> bool:
        return self.data.ndim == 2

    @classmethod
    def from_label(cls, layout: SystemLayout, label: str, density: bool = False) -> "QuantumState":
        v = layout.basis_state(label)
        return cls(np.outer(v, v.conj()) if density else v, layout)

    def populations(self) -> np.ndarray:
        if self.is_density:
            return np.real(np.diagonal(self.data)).copy()
        return np.abs(self.data) ** 2

    def check(self, tol: float = 1e-9) -> None:
        """Raise ``ValueError`` unless the state is physical within ``tol``."""
        if not self.is_density:
            if abs(np.linalg.norm(self.data) - 1.0) > tol:
                raise ValueError("state vector not normalized")
            return
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(rho).real - 1.0) > tol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
            raise ValueError("density matrix not positive semidefinite")


@dataclass
class PropagationResult:
    """Outcome of a propagation.

    Attributes
    ----------
    final : ndarray
        Final vector(s) or operator(s), same shape as the input.
    times : ndarray
        Absolute sample times (strictly increasing).
    populations : ndarray
        ``(len(times), N)`` basis populations; empty for operator batches.
    diagnostics : dict
        Engine, frame, per-segment right-hand-side evaluation counts and
        norm/trace drift.
    states : ndarray or None
        State (vector or density matrix) at every sample time, for a
        single input propagated with ``sampling``.
    """

    final: np.ndarray
    times: np.ndarray
    populations: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    states: np.ndarray | None = None


def build_lindblad_channels(layout: SystemLayout, p: ProtocolParams) -> list[LindbladChannel]:
    """Spontaneous-decay channels of every atom.

    Each control decays from ``r`` to ``g0`` and ``g1`` with rate
    gamma_r/2 each; the target decays from ``R`` to ``e`` with gamma_R and
    from ``e`` to ``A`` and ``B`` with gamma_e/2 each.
    """
    out = []
    for i in layout.control_indices:
        sch = layout.schemes[i]
        for lvl in ("g0", "g1"):
            local = np.sqrt(p.gamma_r / 2.0) * sch.transition(lvl, "r")
            out.append(LindbladChannel(embed_local(layout, i, local), i, local, f"c{i}:r->{lvl}"))
    t = layout.target_index
    local = np.sqrt(p.gamma_R) * TARGET.transition("e", "R")
    out.append(LindbladChannel(embed_local(layout, t, local), t, local, "t:R->e"))
    for lvl in ("A", "B"):
        local = np.sqrt(p.gamma_e / 2.0) * TARGET.transition(lvl, "e")
        out.append(LindbladChannel(embed_local(layout, t, local), t, local, f"t:e->{lvl}"))
    return out


# --- shared helpers -------------------------------------------------------------


def _sample_grid(duration: float, sampling) -> np.ndarray | None:
    if not sampling:
        return None
    return np.linspace(0.0, duration, int(sampling))


def _solve(rhs, y0, duration, t_eval, rtol, atol, segment):
    sol = solve_ivp(
        rhs, (0.0, duration), y0, method="DOP853", t_eval=t_eval,
        rtol=rtol, atol=atol, dense_output=False,
    )
    if sol.status != 0:
        raise IntegrationError(segment, sol.message)
    return sol


def _frame_diag(h, frame: str) -> np.ndarray:
    if frame == "interaction":
        return np.real(np.diag(h.static)).copy()
    if frame == "lab":
        return np.zeros(h.dim)
    raise ValueError("frame must be 'interaction' or 'lab'")


def _choose(method: str, hamiltonians, channels) -> list:
    """Per-segment block structures, or None where the dense engine is used."""
    if method not in ("auto", "dense", "blocks"):
        raise ValueError("method must be 'auto', 'dense' or 'blocks'")
    out = []
    for h in hamiltonians:
        if method == "dense":
            out.append(None)
            continue
        try:
            out.append(_blocks.analyse(h, channels))
        except _blocks.Unsupported:
            if method == "blocks":
                raise
            out.append(None)
    return out


# --- unitary ----------------------------------------------------------------------


def _dense_unitary_segment(h, psi, t_eval, frame, rtol, atol, seg):
    n = h.dim
    d = _frame_diag(h, frame)
    h_off = h.static - np.diag(d)
    ops = h.operators
    cols = psi.shape[1]

    def rhs(t, y):
        c = h.coefficients(t)
        m = h_off.copy()
        if c.size:
            drv = np.tensordot(c, ops, axes=1)
            m += drv + drv.conj().T
        ph = np.exp(1j * d * t)
        m = ph[:, None] * m * ph.conj()[None, :]
        return (-1j * (m @ y.reshape(n, cols))).reshape(-1)

    sol = _solve(rhs, psi.reshape(-1), h.duration, t_eval, rtol, atol, seg)

    def at(k):
        t = sol.t[k]
        return np.exp(-1j * d * t)[:, None] * sol.y[:, k].reshape(n, cols)

    return sol, at


def _block_unitary_segment(bs, psi, t_eval, frame, rtol, atol, seg):
    if frame == "lab":
        bs.diag = np.zeros_like(bs.diag)
    bs.jumps = np.zeros((0, bs.q, bs.q), complex)
    bs.kappa = np.zeros_like(bs.kappa)
    bs.prepare()
    nt, q = bs.n_types, bs.q
    w0 = np.broadcast_to(np.eye(q, dtype=complex), (nt, q, q)).reshape(-1)

    def rhs(t, y):
        heff, _ = bs.generators(t)
        return _kernels.unitary_rhs(y.reshape(nt, q, q), heff).reshape(-1)

    sol = _solve(rhs, w0, bs.h.duration, t_eval, rtol, atol, seg)
    idx = bs.index
    blocks = psi[idx]  # (NS, q, cols)

    def at(k):
        t = sol.t[k]
        w = sol.y[:, k].reshape(nt, q, q)[bs.block_type]
        out = np.empty_like(psi)
        out[idx] = bs.lab_phases(t)[:, :, None] * (w @ blocks)
        return out

    return sol, at


def propagate_unitary(
    state,
    hamiltonians,
    sampling: int | None = None,
    *,
    method: str = "auto",
    frame: str = "interaction",
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> PropagationResult:
    """Solve the Schrodinger equation segment by segment.

    Parameters
    ----------
    state : ndarray
        Vector ``(N,)`` or matrix ``(N, k)`` whose columns are propagated.
    hamiltonians : sequence of TimeDepHamiltonian
        One per segment; each segment's clock starts at zero.
    sampling : int, optional
        Number of uniformly spaced samples per segment (endpoints
        included). Without it only the start and end are recorded.
    """
    psi = np.array(state.data if isinstance(state, QuantumState) else state, dtype=complex)
    single = psi.ndim == 1
    psi = psi.reshape(psi.shape[0], -1)
    structures = _choose(method, hamiltonians, ())
    times, pops = [0.0], [np.abs(psi[:, 0]) ** 2]
    states = [psi[:, 0].copy()]
    diag = {"engine": [], "frame": frame, "nfev": [], "rtol": rtol, "atol": atol}
    t0 = 0.0
    for seg, (h, bs) in enumerate(zip(hamiltonians, structures)):
        if h.dim != psi.shape[0]:
            raise ValueError("state dimension does not match Hamiltonian")
        grid = _sample_grid(h.duration, sampling)
        t_eval = grid if grid is not None else np.array([h.duration])
        if bs is None:
            sol, at = _dense_unitary_segment(h, psi, t_eval, frame, rtol, atol, seg)
            diag["engine"].append("dense")
        else:
            sol, at = _block_unitary_segment(bs, psi, t_eval, frame, rtol, atol, seg)
            diag["engine"].append("blocks")
        diag["nfev"].append(int(sol.nfev))
        for k in range(len(sol.t)):
            if sol.t[k] == 0.0:
                continue
            cur = at(k)
            times.append(t0 + sol.t[k])
            pops.append(np.abs(cur[:, 0]) ** 2)
            states.append(cur[:, 0].copy())
        psi = at(len(sol.t) - 1)
        t0 += h.duration
    start = np.asarray(state.data if isinstance(state, QuantumState) else state)
    norms0 = np.linalg.norm(start.reshape(len(psi), -1), axis=0)
    diag["max_norm_drift"] = float(np.max(np.abs(np.linalg.norm(psi, axis=0) - norms0)))
    final = psi[:, 0] if single else psi
    kept = np.array(states) if single and sampling else None
    return PropagationResult(final, np.array(times), np.array(pops), diag, kept)


# --- Lindblad -----------------------------------------------------------------------


def _dense_lindblad_segment(h, x, channels, t_eval, frame, rtol, atol, seg):
    n = h.dim
    nb = x.shape[0]
    d = _frame_diag(h, frame)
    h_off = h.static - np.diag(d)
    ops = h.operators
    jumps = np.array([c.operator for c in channels]) if channels else np.zeros((0, n, n), complex)
    keep = [k for k in range(len(jumps)) if np.any(jumps[k])]
    jumps = jumps[keep]
    kk = np.einsum("jba,jbc->ac", jumps.conj(), jumps) if len(jumps) else np.zeros((n, n), complex)

    def rhs(t, y):
        c = h.coefficients(t)
        m = h_off - 0.5j * kk
        if c.size:
            drv = np.tensordot(c, ops, axes=1)
            m = m + drv + drv.conj().T
        ph = np.exp(1j * d * t)
        pm = ph[:, None] * ph.conj()[None, :]
        heff = pm * m
        xs = y.reshape(nb, n, n)
        out = -1j * (heff @ xs - xs @ heff.conj().T)
        for a in jumps:
            at = pm * a
            out += at @ xs @ at.conj().T
        return out.reshape(-1)

    sol = _solve(rhs, x.reshape(-1), h.duration, t_eval, rtol, atol, seg)

    def at(k):
        t = sol.t[k]
        ph = np.exp(-1j * d * t)
        return ph[:, None] * sol.y[:, k].reshape(nb, n, n) * ph.conj()[None, :]

    return sol, at


def _block_solver(bs, m0, left, right, feed, t_eval, rtol, atol, seg):
    """Integrate stacked pair blocks ``m0`` of shape (n_blocks, q, q, n_cols)."""
    bs.prepare()
    shape = m0.shape
    f_dst, f_src, f_w, f_dl, f_dr = feed

    def rhs(t, y):
        heff, jf = bs.generators(t)
        out = _kernels.block_rhs(
            y.reshape(shape), heff, jf, bs.h_rows, bs.h_cols,
            bs.j_idx, bs.j_rows, bs.j_cols, left, right,
            f_dst, f_src, f_w, f_dl, f_dr, t,
        )
        return out.reshape(-1)

    return _solve(rhs, m0.reshape(-1), bs.h.duration, t_eval, rtol, atol, seg)


def _from_frame(bs, z, t):
    """(n, NS, NS, q, q) framed pair blocks -> lab-frame full operators."""
    ph = bs.lab_phases(t)
    z = ph[None, :, None, :, None] * z * ph.conj()[None, None, :, None, :]
    return bs.from_blocks(z)


def _block_lindblad_direct(bs, x, t_eval, rtol, atol, seg):
    """Integrate the pair blocks of the given operators directly."""
    ns, q = bs.n_spectator, bs.q
    nb = x.shape[0]
    pairs = np.arange(ns * ns)
    left = bs.block_type[pairs // ns].astype(np.int64)
    right = bs.block_type[pairs % ns].astype(np.int64)
    g = _blocks.pair_graph(bs)
    dl = bs.diag[bs.block_type[g.dst // ns]] - bs.diag[bs.block_type[g.src // ns]]
    dr = bs.diag[bs.block_type[g.dst % ns]] - bs.diag[bs.block_type[g.src % ns]]
    feed = (g.dst.astype(np.int64), g.src.astype(np.int64), g.weight.astype(complex),
            np.ascontiguousarray(dl), np.ascontiguousarray(dr))
    z0 = np.ascontiguousarray(bs.to_blocks(x).reshape(nb, ns * ns, q, q).transpose(1, 2, 3, 0))
    sol = _block_solver(bs, z0, left, right, feed, t_eval, rtol, atol, seg)

    def at(k):
        z = sol.y[:, k].reshape(ns, ns, q, q, nb).transpose(4, 0, 1, 2, 3)
        return _from_frame(bs, z, sol.t[k])

    return sol, at


def _block_lindblad_chains(bs, x, rtol, atol, seg):
    """Integrate one propagator per jump chain and apply it to every input."""
    ns, q = bs.n_spectator, bs.q
    Q = q * q
    nb = x.shape[0]
    g = _blocks.pair_graph(bs)
    ch = _blocks.enumerate_chains(bs, g)
    nc = len(ch.left)
    child = np.flatnonzero(ch.parent >= 0)
    par = ch.parent[child]
    dl = bs.diag[ch.left[child]] - bs.diag[ch.left[par]]
    dr = bs.diag[ch.right[child]] - bs.diag[ch.right[par]]
    feed = (child.astype(np.int64), par.astype(np.int64), np.ones(len(child), complex),
            np.ascontiguousarray(dl), np.ascontiguousarray(dr))
    # chain propagators map vec(X_source) (last axis) to X_end (axes 1, 2)
    m0 = np.zeros((nc, q, q, Q), dtype=complex)
    m0[ch.parent < 0] = np.eye(Q).reshape(q, q, Q)
    sol = _block_solver(bs, m0, ch.left.astype(np.int64), ch.right.astype(np.int64), feed,
                        np.array([bs.h.duration]), rtol, atol, seg)
    mt = sol.y[:, -1].reshape(nc, Q, Q)
    src_blocks = bs.to_blocks(x).reshape(nb, ns * ns, Q)
    out = np.zeros((nb, ns * ns, Q), dtype=complex)
    for c, (src, end, w) in enumerate(ch.apply):
        contrib = (src_blocks[:, src] @ mt[c].T) * w[None, :, None]
        np.add.at(out, (slice(None), end), contrib)
    return sol, _from_frame(bs, out.reshape(nb, ns, ns, q, q), sol.t[-1]), nc


def propagate_lindblad(
    op_or_state,
    hamiltonians,
    channels=(),
    sampling: int | None = None,
    *,
    method: str = "auto",
    frame: str = "interaction",
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    batch_mode: str = "auto",
) -> PropagationResult:
    """Solve dX/dt = -i[H, X] + sum_k (A X A^dag - {A^dag A, X}/2).

    Parameters
    ----------
    op_or_state : ndarray
        One operator ``(N, N)`` or a batch ``(n, N, N)``. Inputs need not be
        density matrices; the generator is linear.
    channels : sequence of LindbladChannel
    sampling : int, optional
        Samples per segment for population trajectories (single input only).
    batch_mode : {"auto", "direct", "chains"}
        Block engine strategy for batches. ``chains`` integrates one
        propagator per distinct jump path and is the fast choice for many
        inputs; ``direct`` integrates the inputs' own blocks.
    """
    x = np.array(op_or_state.data if isinstance(op_or_state, QuantumState) else op_or_state,
                 dtype=complex)
    single = x.ndim == 2
    x = x.reshape((-1,) + x.shape[-2:])
    if x.shape[-1] != x.shape[-2]:
        raise ValueError("operator must be square")
    if frame == "lab" and method != "dense":
        method = "dense"
    channels = list(channels)
    structures = _choose(method, hamiltonians, channels)
    tr0 = np.trace(x, axis1=1, axis2=2)
    herm_in = np.all(np.abs(x - np.conj(np.swapaxes(x, -1, -2))) < 1e-12, axis=(1, 2))
    track = single
    times = [0.0]
    pops = [np.real(np.diagonal(x[0])).copy()] if track else []
    states = [x[0].copy()] if track else []
    diag = {"engine": [], "frame": frame, "nfev": [], "rtol": rtol, "atol": atol, "chains": []}
    t0 = 0.0
    for seg, (h, bs) in enumerate(zip(hamiltonians, structures)):
        if h.dim != x.shape[-1]:
            raise ValueError("operator dimension does not match Hamiltonian")
        grid = _sample_grid(h.duration, sampling) if track else None
        t_eval = grid if grid is not None else np.array([h.duration])
        use_chains = bs is not None and grid is None and (
            batch_mode == "chains" or (batch_mode == "auto" and x.shape[0] > 2))
        if use_chains:
            sol, x, nc = _block_lindblad_chains(bs, x, rtol, atol, seg)
            diag["engine"].append("blocks-chains")
            diag["chains"].append(nc)
            diag["nfev"].append(int(sol.nfev))
            t0 += h.duration
            if track:
                times.append(t0)
                pops.append(np.real(np.diagonal(x[0])).copy())
                states.append(x[0].copy())
            continue
        if bs is None:
            sol, at = _dense_lindblad_segment(h, x, channels, t_eval, frame, rtol, atol, seg)
            diag["engine"].append("dense")
        else:
            sol, at = _block_lindblad_direct(bs, x, t_eval, rtol, atol, seg)
            diag["engine"].append("blocks-direct")
        diag["nfev"].append(int(sol.nfev))
        for k in range(len(sol.t)):
            if sol.t[k] == 0.0 or not track:
                continue
            cur = at(k)
            times.append(t0 + sol.t[k])
            pops.append(np.real(np.diagonal(cur[0])).copy())
            states.append(cur[0].copy())
        x = at(len(sol.t) - 1)
        t0 += h.duration
    tr1 = np.trace(x, axis1=1, axis2=2)
    diag["max_trace_drift"] = float(np.max(np.abs(tr1 - tr0)))
    # only inputs that started Hermitian are expected to stay so
    herm_err = np.abs(x - np.conj(np.swapaxes(x, -1, -2)))[herm_in]
    diag["max_hermiticity_error"] = float(herm_err.max()) if herm_err.size else 0.0
    if not track:
        times = [0.0, t0]
    final = x[0] if single else x
    kept = np.array(states) if track and sampling else None
    return PropagationResult(final, np.array(times), np.array(pops), diag, kept)
