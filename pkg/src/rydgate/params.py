"""Protocol parameters, unit conversions, interaction strengths and timings.

Internally every frequency is an angular frequency in rad/s, every decay
rate is in 1/s, times are in seconds and lengths in micrometres. The
config boundary uses MHz for frequencies (value divided by 2 pi), 1/us for
decay rates and um for lengths; :func:`to_user_units` and
:func:`from_user_units` perform the conversion.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, fields, replace

TWO_PI = 2.0 * math.pi

#: Hartree energy expressed as a frequency, Hz (CODATA 2018).
HARTREE_HZ = 6.579683920502e15
#: Bohr radius in micrometres (CODATA 2018).
BOHR_UM = 5.29177210903e-5

C6_FIT_WINDOW = (30, 100)


class GateKind(enum.Enum):
    TOFFOLI_LINEAR = "toffoli-linear"
    TOFFOLI_PLANAR = "toffoli-planar"
    C3NOT = "c3not"

    @property
    def n_controls(self) -> int:
        return 3 if self is GateKind.C3NOT else 2

    @classmethod
    def parse(cls, value) -> "GateKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(g.value for g in cls)
            raise ValueError(f"unknown gate {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class ProtocolParams:
    """Physical parameters of one gate scenario.

    Attributes
    ----------
    omega_e, omega_c, omega_r : float
        Peak Raman amplitude, target coupling amplitude and control Rabi
        frequency (rad/s).
    delta_big : float
        Raman detuning of the intermediate level (rad/s, positive).
    delta, delta_prime : float
        Detunings of the second and third coupling lasers (rad/s).
    delta_c, delta_c_prime : float
        Detunings of the second and third control pulses (rad/s).
    v, v_cc : float
        Control-target and control-control interaction shifts (rad/s).
    gamma_e, gamma_r, gamma_R : float
        Decay rates of the intermediate level, control Rydberg level and
        target Rydberg level (1/s).
    principal_n : int
        Principal quantum number used for the C6 fit.
    l : float
        Control-target distance in um.
    raman_phase : float
        Phase offset of the B-e Raman beam relative to the A-e beam (rad).
    """

    omega_e: float
    omega_c: float
    omega_r: float
    delta_big: float
    delta: float
    delta_prime: float
    delta_c: float
    delta_c_prime: float
    v: float
    v_cc: float
    gamma_e: float
    gamma_r: float
    gamma_R: float
    principal_n: int = 94
    l: float = 4.0
    raman_phase: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name == "raman_phase":
                if not math.isfinite(val):
                    raise ValueError("raman_phase must be finite")
                continue
            if not math.isfinite(val) or val < 0:
                raise ValueError(f"{f.name} must be finite and >= 0, got {val!r}")
        if self.delta_big <= 0:
            raise ValueError("delta_big must be > 0 (blue detuning)")

    def replace(self, **changes) -> "ProtocolParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Short stable hash of the parameter values."""
        blob = json.dumps({k: repr(v) for k, v in self.to_dict().items()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class DerivedTimings:
    t1: float
    t2: float
    t3: float
    total: float


@dataclass(frozen=True)
class Finding:
    """Outcome of one regime inequality."""

    name: str
    passed: bool
    ratio: float
    requirement: str
    mandatory: bool = True

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: ratio {self.ratio:.4g} ({self.requirement})"


def c6_au(n: int) -> float:
    """Signed C6 coefficient in atomic units from the polynomial fit."""
    lo, hi = C6_FIT_WINDOW
    if not lo <= n <= hi:
        warnings.warn(f"principal number {n} outside fit window {C6_FIT_WINDOW}", stacklevel=2)
    n = float(n)
    return n**11 * (11.97 - 0.8486 * n + 3.385e-3 * n**2)


def c6_hz_um6(n: int) -> float:
    """|C6| in Hz um^6."""
    return abs(c6_au(n)) * HARTREE_HZ * BOHR_UM**6


def interaction_from_distance(c6_hz: float, l: float) -> float:
    """Angular interaction shift |C6|/l^6 for a separation ``l`` in um."""
    if l <= 0:
        raise ValueError("separation must be positive")
    return TWO_PI * abs(c6_hz) / l**6


def distance_from_interaction(c6_hz: float, v: float) -> float:
    """Separation in um at which the angular shift equals ``v``."""
    if v <= 0:
        raise ValueError("interaction must be positive")
    return (TWO_PI * abs(c6_hz) / v) ** (1.0 / 6.0)


def control_separation(gate: GateKind, l: float) -> float:
    """Control-control distance for the layout geometry.

    The linear chain puts the target between the two controls, the planar
    Toffoli uses an equilateral triangle of side ``l`` and the three-control
    gate puts the controls on a triangle of circumradius ``l`` around the
    target.
    """
    gate = GateKind.parse(gate)
    if gate is GateKind.TOFFOLI_LINEAR:
        return 2.0 * l
    if gate is GateKind.TOFFOLI_PLANAR:
        return l
    return math.sqrt(3.0) * l


def default_params(gate, **overrides) -> ProtocolParams:
    """Reference parameter set for ``gate``.

    Omega_e/2pi = 44 MHz, Omega_c = 2.5 Omega_e, Omega_r = Omega_e,
    Delta = 10 Omega_e, n = 94, l = 4 um, Rydberg lifetimes 100 us and an
    intermediate-level lifetime of 26 ns. Interaction shifts come from the
    geometry and the detunings are matched to them.
    """
    gate = GateKind.parse(gate)
    omega_e = TWO_PI * 44e6
    n = overrides.get("principal_n", 94)
    l = overrides.get("l", 4.0)
    c6 = c6_hz_um6(n)
    v = interaction_from_distance(c6, l)
    v_cc = interaction_from_distance(c6, control_separation(gate, l))
    base = dict(
        omega_e=omega_e,
        omega_c=2.5 * omega_e,
        omega_r=omega_e,
        delta_big=10.0 * omega_e,
        delta=v,
        delta_prime=2.0 * v,
        delta_c=v_cc,
        delta_c_prime=2.0 * v_cc,
        v=v,
        v_cc=v_cc,
        gamma_e=1.0 / 26e-9,
        gamma_r=1.0 / 100e-6,
        gamma_R=1.0 / 100e-6,
        principal_n=n,
        l=l,
    )
    base.update(overrides)
    return ProtocolParams(**base)


def derive_timings(p: ProtocolParams, gate) -> DerivedTimings:
    """Segment durations: pi pulses of pi/Omega_r and a Raman segment of
    area pi, i.e. T2 = 16 pi Delta / (3 Omega_e^2)."""
    gate = GateKind.parse(gate)
    if p.omega_r <= 0 or p.omega_e <= 0 or p.delta_big <= 0:
        raise ValueError("omega_r, omega_e and delta_big must be positive")
    t1 = math.pi / p.omega_r
    t2 = 16.0 * math.pi * p.delta_big / (3.0 * p.omega_e**2)
    n_pulses = {GateKind.TOFFOLI_LINEAR: 1, GateKind.TOFFOLI_PLANAR: 2, GateKind.C3NOT: 3}[gate]
    return DerivedTimings(t1=t1, t2=t2, t3=t1, total=2 * n_pulses * t1 + t2)


# thresholds used to read "much greater than"
MUCH_GREATER = 3.0
FAR_DETUNED = 10.0


def validate_regime(p: ProtocolParams, gate=None) -> list[Finding]:
    """Check the inequalities the protocol relies on.

    Every finding carries the computed ratio. ``gate`` enables the
    layout-specific checks (third coupling laser, RAB detunings).
    """
    gate = GateKind.parse(gate) if gate is not None else None
    out: list[Finding] = []

    def add(name, ratio, threshold, requirement, mandatory=True):
        out.append(Finding(name, bool(ratio > threshold), float(ratio), requirement, mandatory))

    def ratio(a, b):
        return a / b if b > 0 else math.inf

    add("raman-detuning", ratio(p.delta_big, p.omega_c), MUCH_GREATER, f"Delta/Omega_c > {MUCH_GREATER}")
    add("coupling-above-raman", ratio(p.omega_c, p.omega_e), 1.0, "Omega_c/Omega_e > 1")
    add("dark-state-following", ratio(p.omega_c, p.omega_e), 2.0, "Omega_c/Omega_e > 2")
    add("second-laser-detuning", ratio(p.delta, p.omega_c), FAR_DETUNED, f"delta/Omega_c > {FAR_DETUNED}")
    eit_width = p.omega_c**2 / (4.0 * p.delta_big)
    add("eit-break", ratio(p.v, eit_width), 1.0, "V/(Omega_c^2/(4 Delta)) > 1")
    t2 = 16.0 * math.pi * p.delta_big / (3.0 * p.omega_e**2) if p.omega_e > 0 else math.inf
    tau = 1.0 / max(p.gamma_r, p.gamma_R) if max(p.gamma_r, p.gamma_R) > 0 else math.inf
    add("raman-within-lifetime", ratio(tau, t2), FAR_DETUNED, f"tau_r/T2 > {FAR_DETUNED}")
    add("detuning-over-linewidth", ratio(p.delta_big, p.gamma_e), FAR_DETUNED,
        f"Delta/gamma_e > {FAR_DETUNED}")
    if gate is GateKind.C3NOT:
        add("third-laser-detuning", ratio(p.delta_prime, p.omega_c), FAR_DETUNED,
            f"delta'/Omega_c > {FAR_DETUNED}")
        add("third-laser-offset", ratio(abs(p.delta_prime - p.v), p.omega_c), FAR_DETUNED,
            f"|delta'-V|/Omega_c > {FAR_DETUNED}")
    if gate in (GateKind.TOFFOLI_PLANAR, GateKind.C3NOT):
        match = abs(p.delta_c - p.v_cc) / p.omega_r
        out.append(Finding("rab-resonance", match < 1e-3, match, "|delta_c - V_cc|/Omega_r < 1e-3"))
        add("rab-blockade", ratio(p.v_cc, p.omega_r), 1.0, "V_cc/Omega_r > 1", mandatory=False)
    if gate is GateKind.C3NOT:
        match = abs(p.delta_c_prime - 2 * p.v_cc) / p.omega_r
        out.append(Finding("rab-resonance-third", match < 1e-3, match,
                           "|delta_c' - 2 V_cc|/Omega_r < 1e-3"))
    return out


# --- unit boundary --------------------------------------------------------

FREQUENCY_FIELDS = (
    "omega_e", "omega_c", "omega_r", "delta_big", "delta", "delta_prime",
    "delta_c", "delta_c_prime", "v", "v_cc",
)
RATE_FIELDS = ("gamma_e", "gamma_r", "gamma_R")


def to_user_units(p: ProtocolParams) -> dict:
    """Parameter dict in config units (MHz, 1/us, um)."""
    d = p.to_dict()
    for k in FREQUENCY_FIELDS:
        d[k] = d[k] / TWO_PI / 1e6
    for k in RATE_FIELDS:
        d[k] = d[k] / 1e6
    return d


def from_user_units(values: dict) -> dict:
    """Convert a config-unit dict to internal units (only keys present)."""
    out = {}
    known = {f.name for f in fields(ProtocolParams)}
    for k, v in values.items():
        if k not in known:
            raise KeyError(f"unknown parameter {k!r}")
        if k in FREQUENCY_FIELDS:
            out[k] = float(v) * TWO_PI * 1e6
        elif k in RATE_FIELDS:
            out[k] = float(v) * 1e6
        elif k == "principal_n":
            out[k] = int(v)
        else:
            out[k] = float(v)
    return out
