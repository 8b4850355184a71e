import numpy as np
import pytest

from conftest import light_params
from rydgate.dynamics import (
    QuantumState,
    build_lindblad_channels,
    propagate_lindblad,
    propagate_unitary,
)
from rydgate.hamiltonians import assemble_full
from rydgate.hilbert import SystemLayout, computational_indices
from rydgate.params import default_params
from rydgate.pulses import Constant, Drive, PulseSchedule, RaisedCosine, Segment
from rydgate.scenario import Scenario


# --- two-atom toy with an independent fixed-step integrator -------------------


def _toy():
    p = default_params("toffoli-linear")
    p = p.replace(v=3 * p.omega_c, delta=3 * p.omega_c, gamma_r=2e6, gamma_R=3e6)
    lay = SystemLayout.with_controls(1)
    dur = 40e-9
    seg = Segment(dur, (
        Drive(0, ("g1", "r"), Constant(p.omega_r), 0.0),
        Drive(1, ("A", "e"), RaisedCosine(p.omega_e, dur), 0.0),
        Drive(1, ("B", "e"), RaisedCosine(p.omega_e, dur), 0.0, 0.4),
        Drive(1, ("e", "R"), Constant(p.omega_c), p.delta),
    ))
    sched = PulseSchedule((seg, seg))
    return p, lay, assemble_full(lay, sched, p), build_lindblad_channels(lay, p)


def _rk4(f, y, t1, steps):
    h = t1 / steps
    t = 0.0
    for _ in range(steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def _oracle_lindblad(hs, channels, rho, steps=6000):
    ops = [c.operator for c in channels]
    for h in hs:
        def f(t, x, h=h):
            m = h(t)
            out = -1j * (m @ x - x @ m)
            for a in ops:
                ad = a.conj().T
                out += a @ x @ ad - 0.5 * (ad @ a @ x + x @ ad @ a)
            return out
        rho = _rk4(f, rho, h.duration, steps)
    return rho


def _oracle_state(hs, psi, steps=6000):
    for h in hs:
        psi = _rk4(lambda t, y, h=h: -1j * h(t) @ y, psi, h.duration, steps)
    return psi


@pytest.mark.parametrize("method", ["dense", "blocks"])
def test_unitary_matches_fixed_step_oracle(method):
    _, lay, hs, _ = _toy()
    psi0 = (lay.basis_state("1A") + lay.basis_state("0B")) / np.sqrt(2)
    ref = _oracle_state(hs, psi0)
    got = propagate_unitary(psi0, hs, method=method).final
    assert np.max(np.abs(got - ref)) < 1e-6


@pytest.mark.parametrize("method", ["dense", "blocks"])
def test_lindblad_matches_fixed_step_oracle(method):
    _, lay, hs, ch = _toy()
    psi0 = (lay.basis_state("1A") + 1j * lay.basis_state("1B")) / np.sqrt(2)
    rho0 = np.outer(psi0, psi0.conj())
    ref = _oracle_lindblad(hs, ch, rho0)
    got = propagate_lindblad(rho0, hs, ch, method=method).final
    assert np.max(np.abs(got - ref)) < 1e-6


def test_frames_agree():
    _, lay, hs, ch = _toy()
    psi0 = lay.basis_state("1A")
    a = propagate_unitary(psi0, hs, frame="interaction").final
    b = propagate_unitary(psi0, hs, frame="lab").final
    assert np.max(np.abs(a - b)) < 1e-7
    rho0 = np.outer(psi0, psi0)
    a = propagate_lindblad(rho0, hs, ch, frame="interaction").final
    b = propagate_lindblad(rho0, hs, ch, frame="lab").final
    assert np.max(np.abs(a - b)) < 1e-7


# --- full gate sequences at reduced interaction ----------------------------


@pytest.fixture(scope="module")
def light():
    return Scenario.build("toffoli-linear", light_params())


def test_block_engine_matches_dense(light):
    idx = computational_indices(light.layout)
    cols = np.eye(light.layout.dim, dtype=complex)[:, idx]
    a = propagate_unitary(cols, light.hamiltonians, method="blocks", rtol=1e-10, atol=1e-12).final
    b = propagate_unitary(cols, light.hamiltonians, method="dense", rtol=1e-10, atol=1e-12).final
    assert np.max(np.abs(a - b)) < 1e-7
    np.testing.assert_allclose(a.conj().T @ a, np.eye(len(idx)), atol=1e-8)


def test_lindblad_linearity_and_trace(light, rng):
    d = light.layout.dim
    m1 = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m2 = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    kw = dict(rtol=1e-10, atol=1e-12, batch_mode="direct")
    out = propagate_lindblad(np.stack([m1, m2, m1 + m2]), light.hamiltonians, light.channels, **kw)
    assert np.max(np.abs(out.final[2] - out.final[0] - out.final[1])) < 1e-8
    tr_in = np.trace(np.stack([m1, m2]), axis1=1, axis2=2)
    tr_out = np.trace(out.final[:2], axis1=1, axis2=2)
    assert np.max(np.abs(tr_out - tr_in)) < 1e-8


def test_chains_match_direct(light, rng):
    d = light.layout.dim
    xs = rng.normal(size=(3, d, d)) + 1j * rng.normal(size=(3, d, d))
    kw = dict(rtol=1e-10, atol=1e-12)
    a = propagate_lindblad(xs, light.hamiltonians, light.channels, batch_mode="chains", **kw)
    b = propagate_lindblad(xs, light.hamiltonians, light.channels, batch_mode="direct", **kw)
    assert np.max(np.abs(a.final - b.final)) < 1e-7


def test_density_matrix_stays_physical(light):
    rho = QuantumState.from_label(light.layout, "11A", density=True)
    res = propagate_lindblad(rho, light.hamiltonians, light.channels, sampling=5)
    QuantumState(res.final, light.layout).check(1e-9)
    assert np.trace(res.final).real == pytest.approx(1.0, abs=1e-9)
    assert res.states.shape == (len(res.times), light.layout.dim, light.layout.dim)
    assert np.all(np.diff(res.times) > 0)


def test_dimension_mismatch(light):
    with pytest.raises(ValueError):
        propagate_unitary(np.ones(5), light.hamiltonians)
