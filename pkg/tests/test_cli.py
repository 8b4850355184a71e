import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydgate.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_REGIME,
    ConfigError,
    RunConfig,
    SweepSpec,
    apply_override,
    main,
    sweep_point,
)
from rydgate.params import default_params

# a cheap interaction (MHz) keeps full-sequence runs to about a second
LIGHT = ["--set", "v=440", "--set", "delta=440", "--set", "delta_prime=880"]


def test_validate_defaults(tmp_path, capsys):
    rc = main(["--gate", "toffoli-linear", "--mode", "validate", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "V = 61.5" in out
    assert "(< 1 us)" in out
    doc = json.loads((tmp_path / "validate.json").read_text())
    assert doc["mandatory_passed"] is True


def test_validate_weak_coupling_fails(tmp_path, capsys):
    rc = main(["--mode", "validate", "--set", "omega_c=44", "--out", str(tmp_path)])
    assert rc == EXIT_REGIME
    assert "[FAIL] dark-state-following" in capsys.readouterr().out


def test_strict_mode_blocks_run(tmp_path):
    rc = main(["--mode", "trajectory", "--set", "omega_c=44", "--strict", "--out", str(tmp_path)])
    assert rc == EXIT_REGIME
    assert not (tmp_path / "trajectory.csv").exists()


@pytest.mark.parametrize("argv", [
    ["--gate", "cnot"],
    ["--mode", "dance"],
    ["--set", "nonsense=1"],
    ["--set", "omega_c=-3"],
    ["--mode", "sweep"],
    ["--mode", "sweep", "--set", "sweep.parameter=delta", "--set", "sweep.start=5",
     "--set", "sweep.stop=1"],
    ["--mode", "trajectory", "--set", "initial_state=22A"],
    ["--bogus-flag"],
])
def test_config_errors_exit_1(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_CONFIG


def test_threads_env_fallback(monkeypatch, tmp_path):
    monkeypatch.setenv("RYDGATE_THREADS", "zero")
    assert main(["--mode", "validate", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_config_file_and_overrides(tmp_path):
    cfg = RunConfig(gate="c3not", mode="fidelity", params={"omega_c": 100.0})
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    loaded = RunConfig.from_json(path.read_text())
    apply_override(loaded, "params.omega_r=50")
    apply_override(loaded, "decay=true")
    assert loaded.params == {"omega_c": 100.0, "omega_r": 50}
    assert loaded.decay is True
    p = loaded.protocol_params()
    assert p.omega_r == pytest.approx(2 * np.pi * 50e6)
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"gate": "c3not", "colour": "red"})


settings_strategy = st.fixed_dictionaries({
    "gate": st.sampled_from(["toffoli-linear", "toffoli-planar", "c3not"]),
    "mode": st.sampled_from(["trajectory", "sweep", "fidelity", "validate"]),
    "params": st.dictionaries(st.sampled_from(["omega_c", "omega_e", "l", "gamma_e"]),
                              st.floats(0.5, 500.0), max_size=3),
    "decay": st.booleans(),
    "samples": st.integers(2, 200),
    "sweep": st.one_of(st.none(), st.builds(
        lambda a, w, n: {"parameter": "delta", "start": a, "stop": a + w, "points": n,
                         "scale": "linear"},
        st.floats(1, 50), st.floats(0.1, 50), st.integers(2, 20))),
})


@settings(max_examples=50, deadline=None)
@given(settings_strategy)
def test_config_round_trip(d):
    cfg = RunConfig.from_dict(d)
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()


def test_sweep_ties_detunings_to_interaction():
    p = default_params("toffoli-linear")
    q = sweep_point("toffoli-linear", p, "V", 2.0)
    assert q.v == pytest.approx(2.0 * p.omega_c**2 / (4 * p.delta_big))
    assert q.delta == q.v and q.delta_prime == 2 * q.v
    q = sweep_point("toffoli-linear", p, "delta", 40.0)
    assert q.delta == pytest.approx(40 * p.omega_c) and q.v == q.delta
    assert sweep_point("toffoli-linear", p, "omega_ratio", 3.0).omega_c == pytest.approx(3 * p.omega_e)
    assert sweep_point("toffoli-linear", p, "gamma_e", 10.0).gamma_e == pytest.approx(1e7)
    assert np.allclose(SweepSpec("delta", 1, 100, 3, "log").values(), [1, 10, 100])


def _sweep_args(out, threads):
    return ["--gate", "toffoli-linear", "--mode", "sweep", "--set", "metric=blocking",
            "--set", "branch=10", "--set", "sweep.parameter=omega_ratio", "--set", "sweep.start=2",
            "--set", "sweep.stop=3", "--set", "sweep.points=2", *LIGHT,
            "--threads", str(threads), "--out", str(out)]


def test_sweep_deterministic_and_parallel_invariant(tmp_path):
    assert main(_sweep_args(tmp_path / "a", 1)) == EXIT_OK
    assert main(_sweep_args(tmp_path / "b", 2)) == EXIT_OK
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0] == "omega_ratio[omega_c/omega_e],blocking_10"
    assert len(lines) == 3 and "\r" not in a.decode()
    meta = json.loads((tmp_path / "a" / "run_meta.json").read_text())
    assert "wall_time_s" in meta


def test_trajectory_outputs(tmp_path):
    # no control-control shift, so the 11 branch transfers cleanly
    args = ["--mode", "trajectory", "--set", "initial_state=11A", "--set", "samples=4", *LIGHT,
            "--set", "v_cc=0", "--set", "delta_c=0", "--set", "delta_c_prime=0"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b"), "--plot"]) == EXIT_OK
    for name in ("trajectory.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "b" / "trajectory.png").stat().st_size > 0
    assert not (tmp_path / "a" / "trajectory.png").exists()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    header = (tmp_path / "a" / "trajectory.csv").read_text().splitlines()[0].split(",")
    assert header[0] == "time_us" and header[-1] == "dark_population" and len(header) == 38
    assert summary["target_B"] > 0.9
    assert {f["name"] for f in summary["findings"]} >= {"dark-state-following"}


def test_fidelity_ideal_shortcut(tmp_path):
    assert main(["--mode", "fidelity", "--gate", "c3not", "--ideal", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "fidelity.json").read_text())
    assert doc["f_raw"] == pytest.approx(1.0, abs=1e-10)
    assert doc["d"] == 16 and len(doc["phases"]) == 4
