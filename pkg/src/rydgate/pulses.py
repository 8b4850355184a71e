"""Pulse envelopes, laser drives and the per-gate pulse schedules.

A drive on the transition ``(lower, upper)`` contributes

    env(t)/2 * exp(i (detuning t + phase)) |lower><upper| + h.c.

to the Hamiltonian, so the operator that lowers the atom carries the
positive-frequency phase factor. Each segment starts its own clock at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import GateKind, ProtocolParams, derive_timings, validate_regime


@dataclass(frozen=True)
class Constant:
    """Time-independent amplitude."""

    amplitude: float

    kind = "constant"

    def __call__(self, t):
        return np.full(np.shape(t), float(self.amplitude)) if np.ndim(t) else float(self.amplitude)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "peak": self.amplitude, "duration": None}


@dataclass(frozen=True)
class RaisedCosine:
    """Smooth turn-on/turn-off pulse (peak/2)(1 - cos(2 pi t / duration)).

    Zero outside ``[0, duration]`` and equal to ``peak`` at the midpoint.
    """

    peak: float
    duration: float

    kind = "raised-cosine"

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        val = 0.5 * self.peak * (1.0 - np.cos(2.0 * np.pi * t / self.duration))
        val = np.where((t >= 0) & (t <= self.duration), val, 0.0)
        return float(val) if val.ndim == 0 else val

    def to_dict(self) -> dict:
        return {"kind": self.kind, "peak": self.peak, "duration": self.duration}


def envelope_from_dict(d: dict):
    if d["kind"] == Constant.kind:
        return Constant(float(d["peak"]))
    if d["kind"] == RaisedCosine.kind:
        return RaisedCosine(float(d["peak"]), float(d["duration"]))
    raise ValueError(f"unknown envelope kind {d['kind']!r}")


@dataclass(frozen=True)
class Drive:
    """One laser field acting on one atom.

    Attributes
    ----------
    atom : int
        Atom index in the layout.
    transition : tuple of str
        ``(lower, upper)`` level labels.
    envelope : Constant or RaisedCosine
        Rabi amplitude as a function of segment time.
    detuning : float
        Angular frequency of the phase factor on ``|lower><upper|``.
    phase : float
        Constant phase offset in radians.
    """

    atom: int
    transition: tuple[str, str]
    envelope: object
    detuning: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "transition", tuple(self.transition))
        if len(self.transition) != 2:
            raise ValueError("transition must be a level pair")
        if not math.isfinite(self.detuning):
            raise ValueError("detuning must be finite")

    def coefficient(self, t):
        """Complex prefactor of ``|lower><upper|`` at segment time ``t``."""
        return 0.5 * self.envelope(t) * np.exp(1j * (self.detuning * np.asarray(t) + self.phase))

    def to_dict(self) -> dict:
        return {
            "atom": self.atom,
            "transition": list(self.transition),
            "envelope": self.envelope.to_dict(),
            "detuning_rad_s": self.detuning,
            "phase": self.phase,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Drive":
        return cls(
            atom=int(d["atom"]),
            transition=tuple(d["transition"]),
            envelope=envelope_from_dict(d["envelope"]),
            detuning=float(d["detuning_rad_s"]),
            phase=float(d.get("phase", 0.0)),
        )


@dataclass(frozen=True)
class Segment:
    duration: float
    drives: tuple[Drive, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "drives", tuple(self.drives))
        if not self.duration > 0:
            raise ValueError("segment duration must be positive")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "duration_s": self.duration,
            "drives": [d.to_dict() for d in self.drives],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        return cls(float(d["duration_s"]), tuple(Drive.from_dict(x) for x in d["drives"]),
                   d.get("label", ""))


@dataclass(frozen=True)
class PulseSchedule:
    segments: tuple[Segment, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def total(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def boundaries(self) -> np.ndarray:
        """Absolute start times of the segments plus the end time."""
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def drives_at(self, t: float) -> tuple[int, tuple[Drive, ...], float]:
        """Segment index, active drives and local time at absolute time ``t``."""
        b = self.boundaries
        if t < 0 or t > b[-1]:
            raise ValueError("time outside schedule")
        k = min(int(np.searchsorted(b, t, side="right")) - 1, len(self.segments) - 1)
        return k, self.segments[k].drives, t - b[k]

    def to_dict(self) -> dict:
        return {"segments": [s.to_dict() for s in self.segments]}

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSchedule":
        return cls(tuple(Segment.from_dict(x) for x in d["segments"]))


# --- builders --------------------------------------------------------------


def _control_pulse(atom: int, p: ProtocolParams, duration: float, detuning: float, label: str):
    return Segment(duration, (Drive(atom, ("g1", "r"), Constant(p.omega_r), detuning),), label)


def raman_segment(p: ProtocolParams, target: int, duration: float, coupling_detunings) -> Segment:
    """Raman beams on A-e and B-e plus one coupling laser per detuning."""
    env = RaisedCosine(p.omega_e, duration)
    drives = [
        Drive(target, ("A", "e"), env, 0.0),
        Drive(target, ("B", "e"), env, 0.0, p.raman_phase),
    ]
    drives += [Drive(target, ("e", "R"), Constant(p.omega_c), d) for d in coupling_detunings]
    return Segment(duration, tuple(drives), "raman")


def _regime_warnings(p: ProtocolParams, gate: GateKind) -> tuple[str, ...]:
    return tuple(f.line() for f in validate_regime(p, gate) if not f.passed)


def schedule_toffoli_linear(p: ProtocolParams) -> PulseSchedule:
    """Simultaneous control pi pulses, Raman segment, pi pulses again."""
    tm = derive_timings(p, GateKind.TOFFOLI_LINEAR)
    pulse = Segment(
        tm.t1,
        tuple(Drive(i, ("g1", "r"), Constant(p.omega_r), 0.0) for i in (0, 1)),
        "controls",
    )
    raman = raman_segment(p, 2, tm.t2, (0.0, p.delta))
    return PulseSchedule((pulse, raman, pulse), _regime_warnings(p, GateKind.TOFFOLI_LINEAR))


def schedule_toffoli_planar(p: ProtocolParams) -> PulseSchedule:
    """Sequential antiblockade pulses on the two controls around the Raman segment."""
    tm = derive_timings(p, GateKind.TOFFOLI_PLANAR)
    s1 = _control_pulse(0, p, tm.t1, 0.0, "control-1")
    s2 = _control_pulse(1, p, tm.t1, p.delta_c, "control-2")
    raman = raman_segment(p, 2, tm.t2, (0.0, p.delta))
    return PulseSchedule((s1, s2, raman, s2, s1), _regime_warnings(p, GateKind.TOFFOLI_PLANAR))


def schedule_c3not(p: ProtocolParams) -> PulseSchedule:
    """Three sequential control pulses, Raman segment with three coupling
    lasers, then the control pulses in reverse order."""
    tm = derive_timings(p, GateKind.C3NOT)
    s1 = _control_pulse(0, p, tm.t1, 0.0, "control-1")
    s2 = _control_pulse(1, p, tm.t1, p.delta_c, "control-2")
    s3 = _control_pulse(2, p, tm.t1, p.delta_c_prime, "control-3")
    raman = raman_segment(p, 3, tm.t2, (0.0, p.delta, p.delta_prime))
    return PulseSchedule((s1, s2, s3, raman, s3, s2, s1), _regime_warnings(p, GateKind.C3NOT))


def build_schedule(gate, p: ProtocolParams) -> PulseSchedule:
    gate = GateKind.parse(gate)
    return {
        GateKind.TOFFOLI_LINEAR: schedule_toffoli_linear,
        GateKind.TOFFOLI_PLANAR: schedule_toffoli_planar,
        GateKind.C3NOT: schedule_c3not,
    }[gate](p)
