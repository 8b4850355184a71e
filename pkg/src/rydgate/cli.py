"""Command-line runner: trajectories, parameter sweeps, fidelity jobs and
regime validation.

Configs are JSON documents. Parameters are given in laboratory units
(frequencies in MHz as value/2pi, rates in 1/us, lengths in um) and are
overrides on top of the per-gate defaults.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 regime
check failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import IntegrationError
from .fidelity import (
    PauliPropagationError,
    average_fidelity,
    blocking_probability,
    ideal_gate,
    reconstruct_channel,
    transfer_probability,
)
from .params import (
    GateKind,
    ProtocolParams,
    default_params,
    derive_timings,
    from_user_units,
    to_user_units,
    validate_regime,
)
from .scenario import Scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_REGIME = 0, 1, 2, 3
MODES = ("trajectory", "sweep", "fidelity", "validate")
SWEEP_PARAMETERS = ("omega_ratio", "delta", "delta_prime", "V", "delta_big", "gamma_e")
SWEEP_UNITS = {
    "omega_ratio": "omega_c/omega_e",
    "delta": "omega_c",
    "delta_prime": "omega_c",
    "V": "omega_c^2/(4 delta_big)",
    "delta_big": "omega_e",
    "gamma_e": "1/us",
}
METRICS = ("blocking", "transfer")
# --set values for these stay strings ("10" is a branch, not a number)
TEXT_FIELDS = {"gate", "mode", "metric", "branch", "initial_state", "out",
               "sweep.parameter", "sweep.scale"}


class ConfigError(ValueError):
    """Invalid run configuration; the message names the field."""


@dataclass
class SweepSpec:
    parameter: str
    start: float
    stop: float
    points: int = 11
    scale: str = "linear"

    def validate(self) -> None:
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep.parameter: unknown {self.parameter!r}; "
                              f"choose from {', '.join(SWEEP_PARAMETERS)}")
        if self.points < 2:
            raise ConfigError("sweep.points: need at least 2")
        if not self.start < self.stop:
            raise ConfigError("sweep.start must be below sweep.stop")
        if self.scale not in ("linear", "log"):
            raise ConfigError("sweep.scale: expected 'linear' or 'log'")
        if self.scale == "log" and self.start <= 0:
            raise ConfigError("sweep.start: log scale needs a positive start")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass
class RunConfig:
    """Everything a run needs. ``params`` holds overrides in config units."""

    gate: str = "toffoli-linear"
    mode: str = "validate"
    params: dict = field(default_factory=dict)
    sweep: SweepSpec | None = None
    metric: str = "transfer"
    branch: str | None = None
    initial_state: str | None = None
    segments: int | None = None
    samples: int = 40
    decay: bool = False
    ideal_shortcut: bool = False
    strict: bool = False
    plot: bool = False
    rtol: float = 1e-8
    atol: float = 1e-10
    out: str = "rydgate-out"
    seed: int = 0  # reserved; every run is deterministic

    def __post_init__(self):
        if isinstance(self.sweep, dict):
            try:
                self.sweep = SweepSpec(**self.sweep)
            except TypeError as exc:
                raise ConfigError(f"sweep: {exc}") from None

    # --- validation ------------------------------------------------------
    def validate(self) -> None:
        try:
            gate = GateKind.parse(self.gate)
        except ValueError:
            raise ConfigError(f"gate: unknown {self.gate!r}") from None
        if self.mode not in MODES:
            raise ConfigError(f"mode: unknown {self.mode!r}; choose from {', '.join(MODES)}")
        self.protocol_params()
        n = gate.n_controls
        if self.initial_state is not None:
            layout = Scenario.build(gate, self.protocol_params()).layout
            if self.initial_state not in layout.labels:
                raise ConfigError(f"initial_state: {self.initial_state!r} is not a basis label")
        if self.branch is not None and (len(self.branch) != n or set(self.branch) - {"0", "1"}):
            raise ConfigError(f"branch: expected {n} bits, got {self.branch!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric: expected one of {', '.join(METRICS)}")
        if self.mode == "sweep":
            if self.sweep is None:
                raise ConfigError("sweep: required in sweep mode")
            self.sweep.validate()
        if self.segments is not None and self.segments < 1:
            raise ConfigError("segments: must be at least 1")
        if self.samples < 2:
            raise ConfigError("samples: must be at least 2")
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError("rtol/atol: must be positive")

    def protocol_params(self) -> ProtocolParams:
        try:
            internal = from_user_units(self.params)
        except KeyError as exc:
            raise ConfigError(f"params: {exc.args[0]}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"params: {exc}") from None
        try:
            # geometry overrides (l, principal_n) feed the derived shifts
            return default_params(self.gate, **internal)
        except ValueError as exc:
            raise ConfigError(f"params: {exc}") from None

    # --- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        if self.sweep is None:
            d["sweep"] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)


def apply_override(cfg: RunConfig, item: str) -> None:
    """Apply one ``key=value`` override. Parameter names may be given bare
    or as ``params.<name>``; ``sweep.<field>`` edits the sweep."""
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = raw if key in TEXT_FIELDS else json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    param_names = {f.name for f in fields(ProtocolParams)}
    if key.startswith("params."):
        cfg.params[key[len("params."):]] = value
    elif key in param_names:
        cfg.params[key] = value
    elif key.startswith("sweep."):
        name = key[len("sweep."):]
        if cfg.sweep is None:
            cfg.sweep = SweepSpec(parameter="delta", start=0.0, stop=1.0)
        if name not in {f.name for f in fields(SweepSpec)}:
            raise ConfigError(f"sweep: unknown field {name!r}")
        setattr(cfg.sweep, name, value)
    elif key in {f.name for f in fields(RunConfig)} - {"params", "sweep"}:
        setattr(cfg, key, value)
    else:
        raise ConfigError(f"--set: unknown key {key!r}")


# --- sweeps ------------------------------------------------------------------


def sweep_point(gate: str, base: ProtocolParams, parameter: str, x: float) -> ProtocolParams:
    """Parameters at one sweep value.

    Sweeping the coupling detuning keeps the interaction matched to it
    (and the second detuning at twice that), and sweeping the interaction
    keeps the detunings matched, so each point is a consistent protocol.
    """
    p = base
    if parameter == "omega_ratio":
        return p.replace(omega_c=x * p.omega_e)
    if parameter == "delta":
        d = x * p.omega_c
        return p.replace(delta=d, v=d, delta_prime=2 * d)
    if parameter == "delta_prime":
        return p.replace(delta_prime=x * p.omega_c)
    if parameter == "V":
        v = x * p.omega_c**2 / (4 * p.delta_big)
        return p.replace(v=v, delta=v, delta_prime=2 * v)
    if parameter == "delta_big":
        return p.replace(delta_big=x * p.omega_e)
    if parameter == "gamma_e":
        return p.replace(gamma_e=x * 1e6)
    raise ConfigError(f"sweep.parameter: unknown {parameter!r}")


def _metric(gate: str, p: ProtocolParams, metric: str, branch: str | None, decay: bool,
            rtol: float, atol: float) -> float:
    sc = Scenario.build(gate, p)
    if metric == "transfer":
        return transfer_probability(sc, decay, rtol=rtol, atol=atol)
    return blocking_probability(sc, branch, decay, rtol=rtol, atol=atol)


def _sweep_job(args):
    gate, p, metric, branch, decay, rtol, atol = args
    return _metric(gate, p, metric, branch, decay, rtol, atol)


# --- runners -----------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([r if isinstance(r, str) else _fmt(r) for r in row])


def _write_json(path: Path, data) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(data), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def _findings(p: ProtocolParams, gate) -> list[dict]:
    return [dict(name=f.name, passed=f.passed, ratio=f.ratio, requirement=f.requirement,
                 mandatory=f.mandatory) for f in validate_regime(p, gate)]


def run_trajectory(cfg: RunConfig, out: Path) -> dict:
    p = cfg.protocol_params()
    sc = Scenario.build(cfg.gate, p)
    n = sc.layout.n_controls
    label = cfg.initial_state or ("1" * n + "A")
    res = sc.evolve(label, cfg.decay, sampling=cfg.samples, segments=cfg.segments,
                    rtol=cfg.rtol, atol=cfg.atol)
    dark = [sc.dark_population(s, min(t, sc.schedule.total)) for s, t in zip(res.states, res.times)]
    header = ["time_us"] + list(sc.layout.labels) + ["dark_population"]
    rows = ([t * 1e6, *pop, dk] for t, pop, dk in zip(res.times, res.populations, dark))
    _write_csv(out / "trajectory.csv", header, rows)
    final = res.populations[-1]
    summary = {
        "gate": sc.gate.value,
        "initial_state": label,
        "decay": cfg.decay,
        "segments_run": len(res.diagnostics["engine"]),
        "params": to_user_units(p),
        "params_hash": p.digest(),
        "final_populations": {lab: float(final[i]) for i, lab in enumerate(sc.layout.labels)
                              if final[i] > 1e-12},
        "target_A": sc.target_population(final, "A"),
        "target_B": sc.target_population(final, "B"),
        "leakage": float(1.0 - final[_computational_mask(sc)].sum()),
        "findings": _findings(p, sc.gate),
        "diagnostics": res.diagnostics,
    }
    _write_json(out / "summary.json", summary)
    if cfg.plot:
        from .plotting import plot_trajectory
        plot_trajectory(res.times, res.populations, sc.layout.labels, dark, out / "trajectory.png")
    return summary


def _computational_mask(sc: Scenario) -> np.ndarray:
    from .hilbert import computational_indices

    m = np.zeros(sc.layout.dim, dtype=bool)
    m[computational_indices(sc.layout)] = True
    return m


def run_sweep(cfg: RunConfig, out: Path, threads: int = 1) -> list[tuple[float, float]]:
    base = cfg.protocol_params()
    n = GateKind.parse(cfg.gate).n_controls
    branch = cfg.branch or ("1" * n if cfg.metric == "transfer" else "0" * n)
    xs = cfg.sweep.values()
    jobs = [(cfg.gate, sweep_point(cfg.gate, base, cfg.sweep.parameter, x), cfg.metric, branch,
             cfg.decay, cfg.rtol, cfg.atol) for x in xs]
    if threads > 1:
        with ProcessPoolExecutor(threads) as pool:
            values = list(pool.map(_sweep_job, jobs))
    else:
        values = [_sweep_job(j) for j in jobs]
    name = f"{cfg.metric}_{branch}" if cfg.metric == "blocking" else cfg.metric
    col = f"{cfg.sweep.parameter}[{SWEEP_UNITS[cfg.sweep.parameter]}]"
    rows = list(zip(xs, values))
    _write_csv(out / "sweep.csv", [col, name], rows)
    if cfg.plot:
        from .plotting import plot_sweep
        plot_sweep(xs, values, col, name, out / "sweep.png", log=cfg.sweep.scale == "log")
    return rows


def run_fidelity(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    p = cfg.protocol_params()
    sc = Scenario.build(cfg.gate, p)
    ch = reconstruct_channel(sc, cfg.decay, ideal_shortcut=cfg.ideal_shortcut,
                             workers=threads, rtol=cfg.rtol, atol=cfg.atol)
    rep = average_fidelity(ch, ideal_gate(sc.gate))
    doc = rep.to_dict()
    doc["diagnostics"] = ch.diagnostics
    _write_json(out / "fidelity.json", doc)
    return doc


def run_validate(cfg: RunConfig, out: Path | None = None, stream=None) -> bool:
    p = cfg.protocol_params()
    gate = GateKind.parse(cfg.gate)
    tm = derive_timings(p, gate)
    findings = validate_regime(p, gate)
    lines = [
        f"gate {gate.value}",
        f"V = {p.v / p.omega_c:.4g} omega_c ({p.v / 2 / np.pi / 1e6:.6g} MHz)",
        f"V_cc = {p.v_cc / p.omega_c:.4g} omega_c ({p.v_cc / 2 / np.pi / 1e6:.6g} MHz)",
        f"T1 = {tm.t1 * 1e9:.4g} ns, T2 = {tm.t2 * 1e6:.4g} us, T3 = {tm.t3 * 1e9:.4g} ns",
        f"total gate time = {tm.total * 1e6:.4g} us" + (" (< 1 us)" if tm.total < 1e-6 else ""),
    ] + [f.line() + ("" if f.mandatory else " [advisory]") for f in findings]
    print("\n".join(lines), file=stream or sys.stdout)
    ok = all(f.passed for f in findings if f.mandatory)
    if out is not None:
        _write_json(out / "validate.json", {
            "gate": gate.value,
            "v_over_omega_c": p.v / p.omega_c,
            "v_cc_over_omega_c": p.v_cc / p.omega_c,
            "timings_s": asdict(tm),
            "findings": _findings(p, gate),
            "mandatory_passed": ok,
        })
    return ok


# --- entry point -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage errors are config errors (exit 1); argparse's default 2 would
    # read as a numerical failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rydgate", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", type=Path, help="JSON run configuration")
    ap.add_argument("--gate", help=", ".join(g.value for g in GateKind))
    ap.add_argument("--mode", help=", ".join(MODES))
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config field or parameter (repeatable)")
    ap.add_argument("--out", type=Path, help="output directory")
    ap.add_argument("--decay", choices=("on", "off"))
    ap.add_argument("--threads", type=int, help="worker processes (default: $RYDGATE_THREADS or 1)")
    ap.add_argument("--strict", action="store_true", help="exit 3 if a mandatory regime check fails")
    ap.add_argument("--plot", action="store_true", help="also render PNG figures")
    ap.add_argument("--ideal", action="store_true",
                    help="fidelity mode: replace the simulation by the ideal gate")
    ap.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    ap.add_argument("--version", action="version", version=f"rydgate {__version__}")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config.read_text()) if args.config else RunConfig()
    if args.gate:
        cfg.gate = args.gate
    if args.mode:
        cfg.mode = args.mode
    for item in args.overrides:
        apply_override(cfg, item)
    if args.out:
        cfg.out = str(args.out)
    if args.decay:
        cfg.decay = args.decay == "on"
    if args.strict:
        cfg.strict = True
    if args.plot:
        cfg.plot = True
    if args.ideal:
        cfg.ideal_shortcut = True
    cfg.validate()
    return cfg


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("RYDGATE_THREADS", "1")
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"RYDGATE_THREADS: not an integer: {env!r}") from None
    if n < 1:
        raise ConfigError("threads: must be at least 1")
    return n


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        threads = _threads(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dump_config:
        print(cfg.to_json())
        return EXIT_OK

    p = cfg.protocol_params()
    regime_ok = all(f.passed for f in validate_regime(p, cfg.gate) if f.mandatory)
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.mode == "validate":
        ok = run_validate(cfg, out)
        return EXIT_OK if ok else EXIT_REGIME
    if cfg.strict and not regime_ok:
        run_validate(cfg, None, stream=sys.stderr)
        print("regime validation failed (strict mode)", file=sys.stderr)
        return EXIT_REGIME

    t0 = time.perf_counter()
    try:
        if cfg.mode == "trajectory":
            run_trajectory(cfg, out)
        elif cfg.mode == "sweep":
            run_sweep(cfg, out, threads)
        else:
            run_fidelity(cfg, out, threads)
    except (IntegrationError, PauliPropagationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    # wall time and host details live apart from the data files
    _write_json(out / "run_meta.json", {
        "config": cfg.to_dict(),
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "threads": threads,
        "python": platform.python_version(),
        "numpy": np.__version__,
    })
    (out / "config.json").write_text(cfg.to_json() + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
