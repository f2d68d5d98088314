"""Fused numba kernels for the ansatz/optimizer hot loop.

These cover whole layers (one diagonal phase, one all-qubit mixer) and the
contractions needed by adjoint differentiation, so a single call does what
would otherwise be dozens of strided numpy operations.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_LOW_BITS = 13  # qubits below this are mixed chunk-by-chunk while the chunk is hot


@nb.njit(cache=True)
def diag_phase(psi, diag, gamma):
    """psi_b *= exp(-i gamma diag_b) for integer-valued diag."""
    lo = diag.min()
    hi = diag.max()
    table = np.empty(hi - lo + 1, dtype=np.complex128)
    for k in range(hi - lo + 1):
        a = gamma * (k + lo)
        table[k] = complex(math.cos(a), -math.sin(a))
    for b in range(psi.shape[0]):
        psi[b] *= table[diag[b] - lo]


@nb.njit(cache=True)
def bond_phase(psi, pairs, angles):
    """psi_b *= exp(-i sum_e angles_e s_i(b) s_j(b))."""
    ne = pairs.shape[0]
    for b in range(psi.shape[0]):
        acc = 0.0
        for e in range(ne):
            if ((b >> pairs[e, 0]) ^ (b >> pairs[e, 1])) & 1:
                acc -= angles[e]
            else:
                acc += angles[e]
        psi[b] *= complex(math.cos(acc), -math.sin(acc))


@nb.njit(cache=True)
def _rx_range(psi, q, c, s, start, stop):
    # exp(-i theta X_q) with c = cos theta, s = sin theta on psi[start:stop]
    step = 1 << q
    for base in range(start, stop, 2 * step):
        for k in range(base, base + step):
            a = psi[k]
            b = psi[k + step]
            psi[k] = complex(c * a.real + s * b.imag, c * a.imag - s * b.real)
            psi[k + step] = complex(c * b.real + s * a.imag, c * b.imag - s * a.real)


@nb.njit(cache=True)
def mixer(psi, n, beta):
    """exp(+i beta sum_i X_i) on all n qubits (rx(-beta) everywhere)."""
    c = math.cos(beta)
    s = -math.sin(beta)
    dim = psi.shape[0]
    low = min(n, _LOW_BITS)
    chunk = 1 << low
    for start in range(0, dim, chunk):
        for q in range(low):
            _rx_range(psi, q, c, s, start, start + chunk)
    for q in range(low, n):
        _rx_range(psi, q, c, s, 0, dim)


@nb.njit(cache=True)
def apply_h(psi, diag, h, n, out):
    """out = diag * psi - h sum_i X_i psi."""
    for b in range(psi.shape[0]):
        acc = psi[b] * 0
        for i in range(n):
            acc += psi[b ^ (1 << i)]
        out[b] = diag[b] * psi[b] - h * acc
    return out


@nb.njit(cache=True)
def imag_vdot_diag(lam, psi, diag):
    """Im sum_b conj(lam_b) diag_b psi_b."""
    acc = 0.0
    for b in range(psi.shape[0]):
        x = lam[b]
        y = psi[b]
        acc += diag[b] * (x.real * y.imag - x.imag * y.real)
    return acc


@nb.njit(cache=True)
def imag_vdot_xsum(lam, psi, n):
    """Im <lam| sum_i X_i |psi>."""
    acc = 0.0
    for b in range(psi.shape[0]):
        x = lam[b]
        t = 0j
        for i in range(n):
            t += psi[b ^ (1 << i)]
        acc += x.real * t.imag - x.imag * t.real
    return acc


@nb.njit(cache=True)
def imag_vdot_bonds(lam, psi, pairs, out):
    """out_e = Im <lam| Z_i Z_j |psi> for every edge e = (i, j)."""
    ne = pairs.shape[0]
    for e in range(ne):
        out[e] = 0.0
    for b in range(psi.shape[0]):
        x = lam[b]
        y = psi[b]
        w = x.real * y.imag - x.imag * y.real
        for e in range(ne):
            if ((b >> pairs[e, 0]) ^ (b >> pairs[e, 1])) & 1:
                out[e] -= w
            else:
                out[e] += w
    return out


def warmup():
    """Trigger compilation (or cache load) of every kernel."""
    psi = np.full(4, 0.5, dtype=np.complex128)
    d = np.array([1, -1, -1, 1], dtype=np.int16)
    pairs = np.array([[0, 1]], dtype=np.int64)
    diag_phase(psi, d, 0.1)
    bond_phase(psi, pairs, np.array([0.1]))
    mixer(psi, 2, 0.1)
    apply_h(psi, d, 0.5, 2, np.empty_like(psi))
    imag_vdot_diag(psi, psi, d)
    imag_vdot_xsum(psi, psi, 2)
    imag_vdot_bonds(psi, psi, pairs, np.empty(1))
