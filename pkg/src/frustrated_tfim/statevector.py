"""Dense statevector engine.

States are plain 1-D ``complex128`` numpy arrays of length ``2**n``.  Qubit ``k``
is bit ``k`` of the basis-state index, and bit value 0 is the ``Z = +1``
eigenstate.  All rotation kernels use the full-angle convention
``exp(-1j * theta * P)`` for a Pauli ``P``, so every parameter-shift is
``+-pi/4``.

Gate kernels act in place on strided views of the amplitude array.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np


def n_qubits_of(psi: np.ndarray) -> int:
    n = int(psi.shape[0]).bit_length() - 1
    if psi.ndim != 1 or 1 << n != psi.shape[0]:
        raise ValueError(f"state length {psi.shape} is not a power of two")
    return n


def _check_qubit(psi, *qubits):
    n = n_qubits_of(psi)
    for q in qubits:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n} qubits")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"two-qubit gate needs distinct qubits, got {qubits}")
    return n


def _split1(psi, i):
    # axis 1 is bit i
    return psi.reshape(-1, 2, 1 << i)


def _split2(psi, i, j):
    # returns view with axes (.., bit hi, .., bit lo, ..) plus a flag telling
    # whether i is the high bit
    hi, lo = (i, j) if i > j else (j, i)
    v = psi.reshape(-1, 2, 1 << (hi - lo - 1), 2, 1 << lo)
    return v, i > j


# ---------------------------------------------------------------------------
# preparation
# ---------------------------------------------------------------------------

def prepare_basis(n: int, index: int = 0) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[index] = 1.0
    return psi


def prepare_plus(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one qubit")
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=np.complex128)


def prepare_sector(n: int, parity: str = "even") -> np.ndarray:
    """|+>^n for the even sector, Z_0 |+>^n for the odd one."""
    psi = prepare_plus(n)
    if parity == "odd":
        apply_z(psi, 0)
    elif parity != "even":
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    return psi


# ---------------------------------------------------------------------------
# gates
# ---------------------------------------------------------------------------

def apply_z(psi: np.ndarray, i: int) -> np.ndarray:
    _check_qubit(psi, i)
    _split1(psi, i)[:, 1, :] *= -1.0
    return psi


def apply_x(psi: np.ndarray, i: int) -> np.ndarray:
    _check_qubit(psi, i)
    v = _split1(psi, i)
    tmp = v[:, 0, :].copy()
    v[:, 0, :] = v[:, 1, :]
    v[:, 1, :] = tmp
    return psi


def apply_rx(psi: np.ndarray, i: int, beta: float) -> np.ndarray:
    """exp(-i beta X_i)."""
    _check_qubit(psi, i)
    c, s = math.cos(beta), math.sin(beta)
    v = _split1(psi, i)
    a = v[:, 0, :].copy()
    b = v[:, 1, :]
    v[:, 0, :] *= c
    v[:, 0, :] -= 1j * s * b
    b *= c
    b -= 1j * s * a
    return psi


def apply_ry(psi: np.ndarray, i: int, theta: float) -> np.ndarray:
    """exp(-i theta Y_i)."""
    _check_qubit(psi, i)
    c, s = math.cos(theta), math.sin(theta)
    v = _split1(psi, i)
    a = v[:, 0, :].copy()
    b = v[:, 1, :]
    v[:, 0, :] *= c
    v[:, 0, :] -= s * b
    b *= c
    b += s * a
    return psi


def apply_rz(psi: np.ndarray, i: int, theta: float) -> np.ndarray:
    """exp(-i theta Z_i)."""
    _check_qubit(psi, i)
    v = _split1(psi, i)
    v[:, 0, :] *= complex(math.cos(theta), -math.sin(theta))
    v[:, 1, :] *= complex(math.cos(theta), math.sin(theta))
    return psi


def apply_rzz(psi: np.ndarray, i: int, j: int, gamma: float) -> np.ndarray:
    """exp(-i gamma Z_i Z_j): amplitude of b picks up exp(-i gamma s_i s_j)."""
    _check_qubit(psi, i, j)
    v, _ = _split2(psi, i, j)
    same = complex(math.cos(gamma), -math.sin(gamma))
    diff = same.conjugate()
    v[:, 0, :, 0, :] *= same
    v[:, 1, :, 1, :] *= same
    v[:, 0, :, 1, :] *= diff
    v[:, 1, :, 0, :] *= diff
    return psi


def apply_cnot(psi: np.ndarray, control: int, target: int) -> np.ndarray:
    _check_qubit(psi, control, target)
    v, control_high = _split2(psi, control, target)
    if control_high:
        a, b = v[:, 1, :, 0, :], v[:, 1, :, 1, :]
    else:
        a, b = v[:, 0, :, 1, :], v[:, 1, :, 1, :]
    tmp = a.copy()
    a[...] = b
    b[...] = tmp
    return psi


def apply_x_sum(psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Return sum_i X_i |psi> (not in place)."""
    n = n_qubits_of(psi)
    if out is None:
        out = np.zeros_like(psi)
    else:
        out[...] = 0.0
    for i in range(n):
        _split1(out, i)[...] += _split1(psi, i)[:, ::-1, :]
    return out


def apply_mixer(psi: np.ndarray, beta: float) -> np.ndarray:
    """exp(-i beta H_X) with H_X = -sum_i X_i, i.e. rx(-beta) on every qubit."""
    for i in range(n_qubits_of(psi)):
        apply_rx(psi, i, -beta)
    return psi


# ---------------------------------------------------------------------------
# overlaps and measurements
# ---------------------------------------------------------------------------

def inner(phi: np.ndarray, psi: np.ndarray) -> complex:
    if phi.shape != psi.shape:
        raise ValueError(f"dimension mismatch {phi.shape} vs {psi.shape}")
    return complex(np.vdot(phi, psi))


def fidelity(phi: np.ndarray, psi: np.ndarray) -> float:
    return abs(inner(phi, psi)) ** 2


def norm(psi: np.ndarray) -> float:
    return float(np.linalg.norm(psi))


def _mask_to_qubits(mask, n):
    if isinstance(mask, (int, np.integer)):
        qubits = [k for k in range(n) if (int(mask) >> k) & 1]
    else:
        qubits = sorted(set(int(q) for q in mask))
    if not qubits or len(qubits) >= n:
        raise ValueError("subsystem must be a non-empty proper subset of the qubits")
    if qubits[0] < 0 or qubits[-1] >= n:
        raise IndexError(f"subsystem {qubits} out of range for {n} qubits")
    return qubits


def default_half_cut(n: int) -> list[int]:
    """Qubits 0 .. ceil(n/2)-1 (row-major first half of the lattice)."""
    return list(range((n + 1) // 2))


def reduced_density(psi: np.ndarray, subsystem) -> np.ndarray:
    """rho_A = Tr_B |psi><psi|.

    ``subsystem`` is a bitmask or an iterable of qubit indices. The result is
    indexed so that subsystem qubit ``qubits[k]`` is bit ``k`` of the row
    index.
    """
    n = n_qubits_of(psi)
    qubits = _mask_to_qubits(subsystem, n)
    rest = [q for q in range(n) if q not in qubits]
    # numpy axis a of the (2,)*n tensor is qubit n-1-a
    t = psi.reshape((2,) * n)
    axes_a = [n - 1 - q for q in reversed(qubits)]
    axes_b = [n - 1 - q for q in reversed(rest)]
    m = np.transpose(t, axes_a + axes_b).reshape(1 << len(qubits), 1 << len(rest))
    return m @ m.conj().T


def von_neumann_entropy(rho: np.ndarray, cutoff: float = 1e-12) -> float:
    w = np.linalg.eigvalsh(rho)
    w = w[w > cutoff]
    return float(-(w * np.log2(w)).sum()) if w.size else 0.0


_POPCOUNT_CACHE: dict[int, np.ndarray] = {}


def popcounts(n: int) -> np.ndarray:
    """Number of set bits of every basis index (cached, int8)."""
    pc = _POPCOUNT_CACHE.get(n)
    if pc is None:
        pc = np.zeros(1 << n, dtype=np.int8)
        for k in range(n):
            _split1(pc, k)[:, 1, :] += 1
        _POPCOUNT_CACHE[n] = pc
    return pc


def magnetization_moments(psi: np.ndarray) -> tuple[float, float]:
    """(<M_z>, <M_z^2>) with M_z = sum_i Z_i, from one pass over |psi|^2."""
    n = n_qubits_of(psi)
    prob = np.abs(psi) ** 2
    m = n - 2 * popcounts(n).astype(np.float64)
    return float(prob @ m), float(prob @ (m * m))


def z_parity(n: int, i: int, j: int) -> np.ndarray:
    """Diagonal of Z_i Z_j as a +-1 int8 vector."""
    out = np.ones(1 << n, dtype=np.int8)
    v, _ = _split2(out, i, j)
    v[:, 0, :, 1, :] = -1
    v[:, 1, :, 0, :] = -1
    return out


# ---------------------------------------------------------------------------
# binary dump
# ---------------------------------------------------------------------------

def dump_amplitudes(psi: np.ndarray, path) -> None:
    """Little-endian (re, im) float64 pairs in ascending index order."""
    Path(path).write_bytes(np.ascontiguousarray(psi, dtype="<c16").tobytes())


def load_amplitudes(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) % struct.calcsize("<dd"):
        raise ValueError(f"{path}: truncated amplitude file")
    psi = np.frombuffer(data, dtype="<c16").astype(np.complex128)
    n_qubits_of(psi)
    return psi
