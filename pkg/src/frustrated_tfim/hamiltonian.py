"""Transverse-field Ising Hamiltonian on a lattice graph.

    H = -J sum_<edges> Z_i Z_j - h sum_i X_i

The ZZ part is diagonal in the computational basis.  Its per-basis-state
values are integers (J = +-1), so they are cached as ``int16`` and the
matrix-free matvec never stores anything larger than the state itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .lattice import LatticeGraph
from .statevector import apply_x_sum, n_qubits_of

NORM_TOL = 1e-10
MAX_CLASSICAL_SITES = 24
MAX_REPRESENTATIVES = 64
_BLOCK_BITS = 20


def _zz_diagonal(n, pairs, coeff, dtype=np.int16):
    """sum over pairs of coeff * s_i s_j for every basis state, built block-wise."""
    d = np.empty(1 << n, dtype=dtype)
    block = 1 << min(n, _BLOCK_BITS)
    base = np.arange(block, dtype=np.int64)
    for start in range(0, 1 << n, block):
        idx = base + start
        acc = np.zeros(block, dtype=np.int32)
        for i, j in pairs:
            acc += 1 - 2 * (((idx >> i) ^ (idx >> j)) & 1).astype(np.int32)
        d[start:start + block] = coeff * acc
    return d


@dataclass(eq=False)
class IsingHamiltonian:
    graph: LatticeGraph
    h: float
    J: float = field(init=False)
    zz_terms: list = field(init=False)
    x_terms: list = field(init=False)
    _diag: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.h < 0:
            raise ValueError(f"transverse field must be >= 0, got {self.h}")
        self.h = float(self.h)
        self.J = self.graph.J
        self.zz_terms = [(e.i, e.j, -self.J) for e in self.graph.edges]
        self.x_terms = [(i, -self.h) for i in range(self.graph.n_sites)]

    @property
    def n_sites(self) -> int:
        return self.graph.n_sites

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def zz_diagonal(self) -> np.ndarray:
        """Diagonal of H_ZZ = -J sum Z_i Z_j (int16, cached)."""
        if self._diag is None:
            self._diag = _zz_diagonal(self.n_sites, self.graph.pairs(), int(-self.J))
        return self._diag

    def with_field(self, h: float) -> "IsingHamiltonian":
        other = IsingHamiltonian(self.graph, h)
        other._diag = self._diag
        return other

    def dump_terms(self) -> str:
        lines = [f"# H on {self.n_sites} sites, J={self.J:+g}, h={self.h:g}",
                 "# bit 0 <-> Z=+1"]
        lines += [f"{c:+g} Z{i} Z{j}" for i, j, c in self.zz_terms]
        lines += [f"{c:+g} X{i}" for i, c in self.x_terms]
        return "\n".join(lines) + "\n"

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        return apply_hamiltonian(self, psi)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.dim, self.dim), matvec=self.matvec,
                              dtype=np.complex128)

    def to_dense(self) -> np.ndarray:
        """Dense matrix assembled from the matvec kernel (N <= 12)."""
        if self.n_sites > 12:
            raise ValueError(f"dense matrix refused for N={self.n_sites} > 12")
        m = np.diag(self.zz_diagonal().astype(np.float64))
        idx = np.arange(self.dim)
        for i in range(self.n_sites):
            m[idx ^ (1 << i), idx] -= self.h
        return m


def apply_hamiltonian(H: IsingHamiltonian, psi: np.ndarray) -> np.ndarray:
    if psi.ndim != 1 or psi.shape[0] != H.dim:
        raise ValueError(f"state of length {psi.shape} does not match 2^{H.n_sites}")
    out = apply_x_sum(psi)
    out *= -H.h
    out += H.zz_diagonal() * psi
    return out


def expectation(H: IsingHamiltonian, psi: np.ndarray, check: bool = True) -> float:
    if check:
        nrm = np.vdot(psi, psi).real
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (|psi|^2 = {nrm!r})")
    val = np.vdot(psi, apply_hamiltonian(H, psi))
    assert abs(val.imag) < 1e-10 * max(1.0, abs(val.real)), val
    return float(val.real)


@dataclass
class ClassicalGroundInfo:
    energy: float
    degeneracy: int
    representatives: list[int]


def classical_energies(graph: LatticeGraph, J: float | None = None) -> np.ndarray:
    J = graph.J if J is None else J
    return _zz_diagonal(graph.n_sites, graph.pairs(), 1, dtype=np.int32) * (-J)


def classical_ground(graph: LatticeGraph, J: float | None = None) -> ClassicalGroundInfo:
    """Exhaustive minimum of -J sum s_i s_j over all 2^N spin configurations."""
    n = graph.n_sites
    if n > MAX_CLASSICAL_SITES:
        raise ValueError(f"brute-force enumeration refused for N={n} > {MAX_CLASSICAL_SITES}")
    e = classical_energies(graph, J)
    emin = e.min()
    hits = np.flatnonzero(e == emin)
    return ClassicalGroundInfo(float(emin), int(hits.size),
                               [int(b) for b in hits[:MAX_REPRESENTATIVES]])


def parity_expectation(psi: np.ndarray) -> float:
    """<psi| prod_i X_i |psi>; prod X maps basis index b to its bitwise complement."""
    n_qubits_of(psi)
    return float(np.vdot(psi, psi[::-1]).real)


def apply_parity(psi: np.ndarray) -> np.ndarray:
    return psi[::-1].copy()
