"""A gate scenario bundles layout, parameters, schedule and Hamiltonians."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dynamics import (
    build_lindblad_channels,
    propagate_lindblad,
    propagate_unitary,
)
from .hamiltonians import assemble_full, dark_states, layout_for
from .hilbert import SystemLayout
from .params import GateKind, ProtocolParams, default_params
from .pulses import PulseSchedule, build_schedule


@dataclass(frozen=True)
class Scenario:
    gate: GateKind
    params: ProtocolParams
    layout: SystemLayout
    schedule: PulseSchedule

    @classmethod
    def build(cls, gate, params: ProtocolParams | None = None) -> "Scenario":
        gate = GateKind.parse(gate)
        p = params if params is not None else default_params(gate)
        return cls(gate, p, layout_for(gate), build_schedule(gate, p))

    @cached_property
    def hamiltonians(self):
        return assemble_full(self.layout, self.schedule, self.params)

    @cached_property
    def channels(self):
        return build_lindblad_channels(self.layout, self.params)

    def evolve(self, label: str, decay: bool = False, sampling: int | None = None,
               segments: int | None = None, **kw):
        """Propagate the basis state ``label`` through the first ``segments``
        segments (all by default)."""
        hs = self.hamiltonians[:segments] if segments is not None else self.hamiltonians
        psi = self.layout.basis_state(label)
        if decay:
            return propagate_lindblad(np.outer(psi, psi.conj()), hs, self.channels, sampling, **kw)
        return propagate_unitary(psi, hs, sampling, **kw)

    def final_populations(self, label: str, decay: bool = False, **kw) -> np.ndarray:
        res = self.evolve(label, decay, **kw)
        if decay:
            return np.real(np.diagonal(res.final)).copy()
        return np.abs(res.final) ** 2

    def target_population(self, pops: np.ndarray, level: str) -> float:
        """Population with the target in ``level``, summed over controls."""
        t = self.layout.target_index
        lvl = self.layout.schemes[t].index(level)
        mask = np.array([self.layout.digits(i)[t] == lvl for i in range(self.layout.dim)])
        return float(pops[mask].sum())

    def raman_amplitude(self, t: float) -> float:
        """Raman Rabi frequency on the target at absolute time ``t``."""
        _, drives, local = self.schedule.drives_at(t)
        for d in drives:
            if d.atom == self.layout.target_index and tuple(d.transition) == ("A", "e"):
                return float(d.envelope(local))
        return 0.0

    def dark_population(self, state: np.ndarray, t: float) -> float:
        """Target population in the instantaneous dark subspace.

        The relative phase between the symmetric Raman combination and
        ``|R>`` in the bright-free state depends on the rotating frame, so
        it is optimised out: for each control configuration the overlap
        with the second dark state is maximised over that phase.
        """
        ds = dark_states(self.params, self.raman_amplitude(t))
        rho = np.outer(state, state.conj()) if state.ndim == 1 else state
        nt = self.layout.dims[self.layout.target_index]
        t_idx = self.layout.target_index
        # reorder so the target is the last factor, then view as (configs, nt, nt)
        dims = list(self.layout.dims)
        order = [i for i in range(len(dims)) if i != t_idx] + [t_idx]
        r = rho.reshape(dims + dims).transpose(order + [len(dims) + i for i in order])
        nc = int(np.prod([dims[i] for i in order[:-1]]))
        r = r.reshape(nc, nt, nc, nt)
        blocks = r[np.arange(nc), :, np.arange(nc), :]
        sym = np.array([1.0, np.exp(1j * self.params.raman_phase), 0, 0]) / np.sqrt(2.0)
        rydberg = self.layout.schemes[t_idx].index("R")
        total = 0.0
        for b in blocks:
            p1 = np.real(ds.d1.conj() @ b @ ds.d1)
            aa = np.real(sym.conj() @ b @ sym)
            bb = np.real(b[rydberg, rydberg])
            ab = abs(sym.conj() @ b[:, rydberg])
            total += p1 + (aa + ds.y**2 * bb + 2 * ds.y * ab) / (1 + ds.y**2)
        return float(total)
