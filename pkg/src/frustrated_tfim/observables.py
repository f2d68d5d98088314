"""Physical observables of variational and exact states.

All quantities are computed from the statevector directly: correlations and
magnetization moments are diagonal expectation values, the entropy comes from
the reduced density matrix of a qubit subset.  Values that need an exact
reference (energy error, fidelity) are ``None`` when no reference is given.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .hamiltonian import expectation
from .lattice import Edge, LatticeGraph
from .statevector import (default_half_cut, magnetization_moments, n_qubits_of,
                          reduced_density, von_neumann_entropy, z_parity)


def _check_size(psi, graph):
    n = n_qubits_of(psi)
    if n != graph.n_sites:
        raise ValueError(f"state on {n} qubits, lattice has {graph.n_sites} sites")


def bond_correlations(psi: np.ndarray, graph: LatticeGraph) -> list[tuple[Edge, float]]:
    """<Z_i Z_j> for every edge, in edge order."""
    _check_size(psi, graph)
    prob = np.abs(psi) ** 2
    n = graph.n_sites
    out = []
    for e in graph.edges:
        val = float(prob @ z_parity(n, e.i, e.j))
        out.append((e, min(1.0, max(-1.0, val))))
    return out


def susceptibility(psi: np.ndarray, n: int | None = None) -> float:
    """(<M^2> - <M>^2) / N with M = sum_i Z_i."""
    n_psi = n_qubits_of(psi)
    n = n_psi if n is None else n
    if n != n_psi:
        raise ValueError(f"N={n} does not match a {n_psi}-qubit state")
    m1, m2 = magnetization_moments(psi)
    return max(0.0, (m2 - m1 * m1) / n)


def entanglement_entropy(psi: np.ndarray, mask=None) -> float:
    """Von Neumann entropy in bits of the qubit subset ``mask`` (default: half cut)."""
    n = n_qubits_of(psi)
    mask = default_half_cut(n) if mask is None else mask
    return max(0.0, von_neumann_entropy(reduced_density(psi, mask)))


@dataclass
class ObservableReport:
    energy: float
    energy_error: float | None
    relative_energy_error: float | None
    fidelity: float | None
    gap: float | None
    susceptibility: float
    entropy: float
    magnetization: float
    bond_correlations: list

    def __post_init__(self):
        if self.fidelity is not None:
            assert -1e-9 <= self.fidelity <= 1 + 1e-9, self.fidelity
        if self.gap is not None:
            assert self.gap >= 0, self.gap
        assert self.susceptibility >= 0 and self.entropy >= 0
        assert all(-1 <= c <= 1 for _, c in self.bond_correlations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bond_correlations"] = [
            {"i": e.i, "j": e.j, "kind": e.kind.value, "value": c}
            for e, c in self.bond_correlations]
        return d


def compile_report(result, reference, graph: LatticeGraph, gap: float | None = None,
                   mask=None, H=None) -> ObservableReport:
    """Observables of a VQE result (or a bare statevector) against an optional reference.

    ``reference`` is a SpectrumResult or None.  For a bare statevector the
    energy is evaluated with ``H`` (NaN if it is not given).  ``gap`` is
    whatever excitation gap estimate the caller has; it is stored as is.
    """
    from .variational import degenerate_fidelity

    if isinstance(result, np.ndarray):
        psi = result
        energy = expectation(H, psi) if H is not None else float("nan")
    else:
        psi = result.state
        energy = float(result.best_energy)
    _check_size(psi, graph)
    err = rel = fid = None
    if reference is not None:
        e0 = reference.ground_energy
        if np.isfinite(energy):
            err = energy - e0
            rel = abs(err) / abs(e0) if e0 != 0 else None
        if reference.eigenvectors is not None:
            fid = min(1.0, degenerate_fidelity(psi, reference))
    m1, _ = magnetization_moments(psi)
    return ObservableReport(
        energy=energy, energy_error=err, relative_energy_error=rel, fidelity=fid,
        gap=None if gap is None else abs(float(gap)),
        susceptibility=susceptibility(psi), entropy=entanglement_entropy(psi, mask),
        magnetization=m1, bond_correlations=bond_correlations(psi, graph))


def write_correlation_csv(path, rows) -> None:
    """rows: iterable of (label dict, [(Edge, value), ...]); one CSV line per edge."""
    with open(path, "w", newline="") as fh:
        w = None
        for label, corr in rows:
            for e, c in corr:
                rec = dict(label, i=e.i, j=e.j, kind=e.kind.value, value=repr(float(c)))
                if w is None:
                    w = csv.DictWriter(fh, fieldnames=list(rec))
                    w.writeheader()
                w.writerow(rec)
