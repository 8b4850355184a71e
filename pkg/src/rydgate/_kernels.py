"""Compiled right-hand sides for the block engine.

The block generators are tiny (4x4 up to 9x9) so numpy call overhead
dominates; these loops run the same algebra under numba.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .pulses import Constant, RaisedCosine

KIND_CONSTANT = 0
KIND_RAISED_COSINE = 1


def coefficient_table(terms):
    """Pack term envelopes into arrays, or return None if any is unknown.

    Columns: kind, amplitude, duration, detuning, phase, scale.
    """
    rows = []
    for term in terms:
        env = term.envelope
        if isinstance(env, Constant):
            rows.append((KIND_CONSTANT, env.amplitude, 1.0, term.detuning, term.phase, term.scale))
        elif isinstance(env, RaisedCosine):
            rows.append((KIND_RAISED_COSINE, env.peak, env.duration, term.detuning, term.phase, term.scale))
        else:
            return None
    return np.array(rows, dtype=float).reshape(-1, 6)


@njit(cache=True)
def coefficients(t, table):
    n = table.shape[0]
    out = np.empty(n, dtype=np.complex128)
    for k in range(n):
        kind = table[k, 0]
        amp = table[k, 1]
        if kind == KIND_RAISED_COSINE:
            dur = table[k, 2]
            if t < 0.0 or t > dur:
                amp = 0.0
            else:
                amp = 0.5 * amp * (1.0 - np.cos(2.0 * np.pi * t / dur))
        out[k] = table[k, 5] * amp * np.exp(1j * (table[k, 3] * t + table[k, 4]))
    return out


@njit(cache=True)
def type_generators(t, cf, static, ops, diag, kmat, kappa, jumps):
    """Framed non-Hermitian Hamiltonians (nt, q, q) and jumps (nt, J, q, q)."""
    nt, q = diag.shape
    nk = cf.shape[0]
    nj = jumps.shape[0]
    heff = np.empty((nt, q, q), dtype=np.complex128)
    jf = np.empty((nt, nj, q, q), dtype=np.complex128)
    for ty in range(nt):
        for a in range(q):
            for b in range(q):
                v = static[ty, a, b]
                for k in range(nk):
                    v += cf[k] * ops[ty, k, a, b] + np.conj(cf[k] * ops[ty, k, b, a])
                if a == b:
                    v -= diag[ty, a]
                    v -= 0.5j * kappa[ty]
                ph = np.exp(1j * t * (diag[ty, a] - diag[ty, b]))
                heff[ty, a, b] = ph * (v - 0.5j * kmat[a, b])
                for j in range(nj):
                    jf[ty, j, a, b] = ph * jumps[j, a, b]
    return heff, jf


@njit(cache=True)
def block_rhs(m, heff, jf, h_rows, h_cols, j_idx, j_rows, j_cols,
              left, right, f_dst, f_src, f_w, f_dl, f_dr, t):
    """Generator applied to a stack of pair blocks.

    ``m`` has shape (n_blocks, q, q, n_cols); block ``c`` evolves as
    ``-i(Hl X - X Hr^dag) + sum_j Jl X Jr^dag`` with ``Hl`` the left type's
    Hamiltonian, plus feeds ``w * phi(t) * m[src]`` into ``dst``.
    ``h_rows``/``h_cols`` list the structurally nonzero Hamiltonian entries;
    ``j_idx``/``j_rows``/``j_cols`` those of the jumps.
    """
    nb, q, _, nc = m.shape
    out = np.zeros_like(m)
    nh = h_rows.shape[0]
    nje = j_rows.shape[0]
    for c in range(nb):
        lt = left[c]
        rt = right[c]
        for e in range(nh):
            a = h_rows[e]
            b2 = h_cols[e]
            hl = -1j * heff[lt, a, b2]
            hr = 1j * np.conj(heff[rt, a, b2])
            if hl != 0:
                for b in range(q):
                    for k in range(nc):
                        out[c, a, b, k] += hl * m[c, b2, b, k]
            if hr != 0:
                # (X Hr^dag)[x, a] = sum_b2 X[x, b2] conj(Hr[a, b2])
                for x in range(q):
                    for k in range(nc):
                        out[c, x, a, k] += hr * m[c, x, b2, k]
        for e1 in range(nje):
            j = j_idx[e1]
            a = j_rows[e1]
            b1 = j_cols[e1]
            vl = jf[lt, j, a, b1]
            if vl == 0:
                continue
            for e2 in range(nje):
                if j_idx[e2] != j:
                    continue
                a2 = j_rows[e2]
                b2 = j_cols[e2]
                v = vl * np.conj(jf[rt, j, a2, b2])
                for k in range(nc):
                    out[c, a, a2, k] += v * m[c, b1, b2, k]
    for f in range(f_dst.shape[0]):
        d = f_dst[f]
        s = f_src[f]
        for a in range(q):
            for b in range(q):
                v = f_w[f] * np.exp(1j * t * (f_dl[f, a] - f_dr[f, b]))
                for k in range(nc):
                    out[d, a, b, k] += v * m[s, a, b, k]
    return out


@njit(cache=True)
def unitary_rhs(w, heff):
    nt, q, _ = w.shape
    out = np.zeros_like(w)
    for ty in range(nt):
        for a in range(q):
            for b in range(q):
                h = heff[ty, a, b]
                if h != 0:
                    for c in range(q):
                        out[ty, a, c] += -1j * h * w[ty, b, c]
    return out
