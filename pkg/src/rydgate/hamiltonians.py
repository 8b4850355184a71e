"""Time-dependent Hamiltonians: full composite system, single-branch target
models, second-order Magnus averages and the target dark states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hilbert import SystemLayout, TARGET, embed, embed_local, LocalOperator
from .params import GateKind, ProtocolParams, derive_timings
from .pulses import Constant, Drive, PulseSchedule, RaisedCosine


@dataclass(frozen=True)
class HamiltonianTerm:
    """``scale * envelope(t) * exp(i(detuning t + phase)) * operator`` plus its
    Hermitian conjugate."""

    operator: np.ndarray
    envelope: object
    detuning: float = 0.0
    phase: float = 0.0
    scale: float = 0.5

    def __call__(self, t):
        return self.scale * self.envelope(t) * np.exp(1j * (self.detuning * np.asarray(t) + self.phase))


@dataclass(frozen=True)
class TimeDepHamiltonian:
    """``H(t) = static + sum_k [c_k(t) O_k + conj(c_k(t)) O_k^dagger]``.

    Attributes
    ----------
    static : ndarray
        Hermitian time-independent part.
    terms : tuple of HamiltonianTerm
        Driven terms; each is completed by its Hermitian conjugate.
    duration : float
        Segment length in seconds (local time runs over ``[0, duration]``).
    dims : tuple of int
        Local dimensions of the atoms, used to detect block structure.
    label : str
        Free-form name used in diagnostics.
    """

    static: np.ndarray
    terms: tuple[HamiltonianTerm, ...]
    duration: float
    dims: tuple[int, ...] = ()
    label: str = ""
    _ops: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        n = self.static.shape[0]
        if not self.dims:
            object.__setattr__(self, "dims", (n,))
        ops = np.array([t.operator for t in self.terms]) if self.terms else np.zeros((0, n, n), complex)
        object.__setattr__(self, "_ops", ops)

    @property
    def dim(self) -> int:
        return self.static.shape[0]

    @property
    def operators(self) -> np.ndarray:
        return self._ops

    def coefficients(self, t: float) -> np.ndarray:
        return np.array([term(t) for term in self.terms], dtype=complex)

    def __call__(self, t: float) -> np.ndarray:
        h = self.static.astype(complex)
        if self.terms:
            drive = np.tensordot(self.coefficients(t), self._ops, axes=1)
            h = h + drive + drive.conj().T
        return h


# --- full system -----------------------------------------------------------


def layout_for(gate) -> SystemLayout:
    return SystemLayout.with_controls(GateKind.parse(gate).n_controls)


def interaction_operator(layout: SystemLayout, p: ProtocolParams) -> np.ndarray:
    """Static part shared by every segment: intermediate-level detuning plus
    control-target and control-control Rydberg shifts."""
    tgt = layout.target_index
    ctrls = layout.control_indices
    n_r = layout.schemes[ctrls[0]].projector("r")
    h = -p.delta_big * embed_local(layout, tgt, TARGET.projector("e"))
    for i in ctrls:
        h = h + p.v * embed(layout, [LocalOperator(i, n_r), LocalOperator(tgt, TARGET.projector("R"))])
    for a in range(len(ctrls)):
        for b in range(a + 1, len(ctrls)):
            h = h + p.v_cc * embed(layout, [LocalOperator(ctrls[a], n_r), LocalOperator(ctrls[b], n_r)])
    return h


def _drive_term(layout: SystemLayout, d: Drive) -> HamiltonianTerm:
    scheme = layout.schemes[d.atom]
    lower, upper = d.transition
    for lvl in (lower, upper):
        scheme.index(lvl)  # raises KeyError on unknown levels
    op = embed_local(layout, d.atom, scheme.transition(lower, upper))
    return HamiltonianTerm(op, d.envelope, d.detuning, d.phase)


def assemble_full(layout: SystemLayout, schedule: PulseSchedule,
                  p: ProtocolParams) -> list[TimeDepHamiltonian]:
    """One composite-space Hamiltonian per schedule segment."""
    static = interaction_operator(layout, p)
    out = []
    for seg in schedule.segments:
        terms = tuple(_drive_term(layout, d) for d in seg.drives)
        h = TimeDepHamiltonian(static, terms, seg.duration, layout.dims, seg.label)
        probe = h(0.37 * seg.duration)
        assert np.allclose(probe, probe.conj().T, atol=1e-6 * max(1.0, np.abs(probe).max()))
        out.append(h)
    return out


# --- single-branch target models --------------------------------------------


def coupling_detunings(gate, p: ProtocolParams) -> tuple[float, ...]:
    gate = GateKind.parse(gate)
    if gate is GateKind.C3NOT:
        return (0.0, p.delta, p.delta_prime)
    return (0.0, p.delta)


def rydberg_count(gate, branch: str) -> int:
    """Number of controls sitting in ``|r>`` while the Raman pulse runs.

    ``branch`` is either a control bit string (``"10"``) or an explicit
    Rydberg pattern (``"r0"``, ``"rr0"``). The linear layout excites every
    control in ``|1>`` at once; the sequential layouts only climb while
    the preceding controls are excited, so only the leading run of ones
    counts.
    """
    gate = GateKind.parse(gate)
    if len(branch) != gate.n_controls or any(c not in "01r" for c in branch):
        raise ValueError(f"invalid branch {branch!r} for {gate.value}")
    if "r" in branch:
        return branch.count("r")
    if gate is GateKind.TOFFOLI_LINEAR:
        return branch.count("1")
    k = 0
    for c in branch:
        if c != "1":
            break
        k += 1
    return k


def reduced_branch(gate, branch: str, p: ProtocolParams, frame: str = "rotating") -> TimeDepHamiltonian:
    """Target-only Raman-segment Hamiltonian for one control branch.

    Parameters
    ----------
    frame : {"rotating", "lab"}
        ``"lab"`` keeps the full shift ``k V |R><R|`` for ``k`` excited
        controls. ``"rotating"`` removes up to ``(L-1) V`` of it, where
        ``L`` is the number of coupling lasers, by moving into the frame
        rotating at that frequency on ``|R>``; the coupling phases change
        accordingly and whatever shift is left stays static.
    """
    gate = GateKind.parse(gate)
    k = rydberg_count(gate, branch)
    dets = coupling_detunings(gate, p)
    if frame == "rotating":
        theta = min(k, len(dets) - 1) * p.v
    elif frame == "lab":
        theta = 0.0
    else:
        raise ValueError("frame must be 'rotating' or 'lab'")
    t2 = derive_timings(p, gate).t2
    env = RaisedCosine(p.omega_e, t2)
    terms = [
        HamiltonianTerm(TARGET.transition("A", "e"), env, 0.0, 0.0),
        HamiltonianTerm(TARGET.transition("B", "e"), env, 0.0, p.raman_phase),
    ]
    terms += [HamiltonianTerm(TARGET.transition("e", "R"), Constant(p.omega_c), d - theta) for d in dets]
    static = -p.delta_big * TARGET.projector("e") + (k * p.v - theta) * TARGET.projector("R")
    return TimeDepHamiltonian(static, tuple(terms), t2, (4,), f"branch-{branch}")


def rotate_rydberg_frame(h_t: np.ndarray, t: float, n_r: np.ndarray, theta: float) -> np.ndarray:
    """Hamiltonian seen in the frame ``U = exp(-i theta t n_r)`` (``n_r`` diagonal)."""
    ph = np.exp(-1j * theta * t * np.real(np.diag(n_r)))
    return ph.conj()[:, None] * h_t * ph[None, :] - theta * n_r


# --- Magnus averaging ---------------------------------------------------------


def _frequency_components(h: TimeDepHamiltonian, t_freeze: float) -> dict[float, np.ndarray]:
    comps: dict[float, np.ndarray] = {0.0: h.static.astype(complex)}

    def add(w, m):
        comps[w] = comps.get(w, 0) + m

    for term in h.terms:
        a = term.scale * term.envelope(t_freeze) * np.exp(1j * term.phase)
        add(float(term.detuning), a * term.operator)
        add(-float(term.detuning), np.conj(a) * term.operator.conj().T)
    return comps


def _exp_integral(w: float, T: float, tiny: float) -> complex:
    if abs(w) * T < tiny:
        return complex(T)
    return (np.exp(1j * w * T) - 1.0) / (1j * w)


def _nested_integral(w1: float, w2: float, T: float, tiny: float) -> complex:
    """int_0^T dt1 e^{i w1 t1} int_0^t1 dt2 e^{i w2 t2}."""
    if abs(w2) * T >= tiny:
        return (_exp_integral(w1 + w2, T, tiny) - _exp_integral(w1, T, tiny)) / (1j * w2)
    if abs(w1) * T < tiny:
        return complex(T * T / 2.0)
    e = np.exp(1j * w1 * T)
    return T * e / (1j * w1) + (e - 1.0) / w1**2


def magnus_effective(
    h: TimeDepHamiltonian,
    window: float,
    *,
    asymptotic: bool = False,
    cross_terms: bool = True,
    t_freeze: float | None = None,
) -> np.ndarray:
    """Second-order Magnus average of ``h`` over ``[0, window]``.

    Envelopes are frozen at ``t_freeze`` (default: mid-window) so every
    term is a pure exponential and both orders are evaluated in closed
    form.

    Parameters
    ----------
    asymptotic : bool
        Take the long-window limit: keep the non-oscillating part and the
        light shifts ``[B_w, B_-w]/w`` only.
    cross_terms : bool
        If False, the second-order sum keeps only commutators between a
        component and its own conjugate partner, which is the truncation
        behind the usual sinc-weighted Stark-shift formula.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    tf = 0.5 * window if t_freeze is None else t_freeze
    comps = _frequency_components(h, tf)
    tiny = 1e-9
    freqs = sorted(comps)
    if asymptotic:
        out = comps[0.0].copy()
        for w in freqs:
            if w > 0:
                bw, bm = comps[w], comps[-w]
                out += (bw @ bm - bm @ bw) / w
        return out
    T = window
    out = sum(comps[w] * _exp_integral(w, T, tiny) for w in freqs) / T
    second = np.zeros_like(out)
    for w1 in freqs:
        for w2 in freqs:
            if not cross_terms and not (w1 == -w2 and w1 != 0):
                continue
            b1, b2 = comps[w1], comps[w2]
            c = b1 @ b2 - b2 @ b1
            if np.any(c):
                second += c * _nested_integral(w1, w2, T, tiny)
    return out - 1j / (2 * T) * second


# --- dark states ------------------------------------------------------------


@dataclass(frozen=True)
class DarkStatePair:
    d1: np.ndarray
    d2: np.ndarray
    y: float

    @property
    def dark(self) -> np.ndarray:
        """Equal superposition of the two dark states (``|A>`` when y = 0)."""
        return (self.d1 + self.d2) / math.sqrt(2.0)


def resonant_drive(p: ProtocolParams, omega_e_now: float) -> np.ndarray:
    """Raman beams plus the resonant coupling laser on the target space."""
    m = 0.5 * omega_e_now * (
        TARGET.transition("A", "e") + np.exp(1j * p.raman_phase) * TARGET.transition("B", "e")
    ) + 0.5 * p.omega_c * TARGET.transition("e", "R")
    return m + m.conj().T


def dark_states(p: ProtocolParams, omega_e_now: float) -> DarkStatePair:
    """States annihilated by :func:`resonant_drive`.

    ``d1`` is the antisymmetric Raman combination; ``d2`` is the unique
    unit vector in span{A, B, R} orthogonal to it, with mixing
    ``y = sqrt(2) omega_e_now / omega_c`` on ``|R>``.
    """
    if p.omega_c <= 0:
        raise ValueError("omega_c must be positive")
    ph = np.exp(1j * p.raman_phase)
    y = math.sqrt(2.0) * omega_e_now / p.omega_c
    d1 = np.array([1.0, -ph, 0.0, 0.0], dtype=complex) / math.sqrt(2.0)
    d2 = np.array([1.0 / math.sqrt(2.0), ph / math.sqrt(2.0), 0.0, -y], dtype=complex)
    d2 /= math.sqrt(1.0 + y * y)
    return DarkStatePair(d1, d2, y)
