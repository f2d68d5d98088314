"""Variational circuits: HVA, bond-resolved HVA and a hardware-efficient ansatz.

Parameter layout, per layer ``k``:

* HVA      -- ``[gamma_k, beta_k]``
* BondHVA  -- ``[gamma_k(e) for e in graph.edges] + [beta_k]``
* HEA      -- ``[theta1_k(i) for i in sites] + [theta2_k(i) for i in sites]``

HVA layers are ``exp(-i beta H_X) exp(-i gamma H_ZZ)`` with ``H_ZZ = -J sum ZZ``
and ``H_X = -sum X``; the bond-resolved layer uses ``exp(-i gamma_e Z_i Z_j)``
per edge.  An HEA layer is ``Ry(theta1) Rz(theta2)`` on every qubit (Ry first)
followed by the CNOT chain ``(0,1), (1,2), ...``.

HVA-type circuits conserve ``prod_i X_i``.  Sector ``even`` starts from
``|+>^N`` and ``odd`` from ``Z_0 |+>^N``.  Sector ``none`` starts from
``exp(-i phi Y_0) |+>^N`` with one extra trailing parameter ``phi`` that sets the
even/odd weights (``cos^2 phi`` / ``sin^2 phi``); deflation runs use it to reach
states of either parity.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from . import statevector as sv
from .lattice import AnsatzKind, Coupling, LatticeGraph, LatticeSpec, build_lattice, cnot_count

__all__ = [
    "AnsatzKind", "Sector", "AnsatzSpec", "Gate", "ParamSlot", "param_count",
    "parameter_layout", "preserves_parity", "initial_state", "gate_program",
    "gate_counts", "prepare_state", "energy_and_gradient", "pad_parameters",
    "save_parameters", "load_parameters",
]


class Sector(str, enum.Enum):
    EVEN = "even"
    ODD = "odd"
    NONE = "none"


@dataclass(frozen=True)
class AnsatzSpec:
    kind: AnsatzKind
    graph: LatticeGraph
    p: int
    sector: Sector | None = None
    hea_init: str = "zero"

    def __post_init__(self):
        kind = AnsatzKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"depth must be a positive integer, got {self.p}")
        sector = self.sector
        if sector is None:
            sector = Sector.NONE if kind is AnsatzKind.HEA else Sector.EVEN
        sector = Sector(sector)
        if kind is AnsatzKind.HEA and sector is not Sector.NONE:
            raise ValueError("the hardware-efficient ansatz does not preserve parity; "
                             "use sector='none'")
        object.__setattr__(self, "sector", sector)
        if self.hea_init not in ("zero", "plus"):
            raise ValueError(f"hea_init must be 'zero' or 'plus', got {self.hea_init!r}")

    @property
    def n_qubits(self) -> int:
        return self.graph.n_sites

    @property
    def n_params(self) -> int:
        return param_count(self)

    @property
    def mixing(self) -> bool:
        """True for HVA-type circuits with the parity-mixing input rotation."""
        return self.kind is not AnsatzKind.HEA and self.sector is Sector.NONE

    def with_depth(self, p: int) -> "AnsatzSpec":
        return AnsatzSpec(self.kind, self.graph, p, self.sector, self.hea_init)

    def with_sector(self, sector) -> "AnsatzSpec":
        return AnsatzSpec(self.kind, self.graph, self.p, sector, self.hea_init)


class ParamSlot(NamedTuple):
    layer: int
    role: str       # gamma | gamma_ij | beta | theta1 | theta2
    target: tuple   # edge (i, j), site (i,), or () for shared angles


class Gate(NamedTuple):
    name: str       # rzz | rx | ry | rz | cnot
    qubits: tuple
    param: int      # -1 for fixed gates
    coeff: float    # rotation angle = coeff * theta[param]


def _per_layer(spec: AnsatzSpec) -> int:
    if spec.kind is AnsatzKind.HVA:
        return 2
    if spec.kind is AnsatzKind.BOND_HVA:
        return len(spec.graph.edges) + 1
    return 2 * spec.n_qubits


def param_count(spec: AnsatzSpec) -> int:
    return spec.p * _per_layer(spec) + int(spec.mixing)


def parameter_layout(spec: AnsatzSpec) -> list[ParamSlot]:
    out = []
    for k in range(spec.p):
        if spec.kind is AnsatzKind.HVA:
            out += [ParamSlot(k, "gamma", ()), ParamSlot(k, "beta", ())]
        elif spec.kind is AnsatzKind.BOND_HVA:
            out += [ParamSlot(k, "gamma_ij", (e.i, e.j)) for e in spec.graph.edges]
            out.append(ParamSlot(k, "beta", ()))
        else:
            out += [ParamSlot(k, "theta1", (i,)) for i in range(spec.n_qubits)]
            out += [ParamSlot(k, "theta2", (i,)) for i in range(spec.n_qubits)]
    if spec.mixing:
        out.append(ParamSlot(-1, "phi", (0,)))
    return out


def preserves_parity(spec: AnsatzSpec) -> bool:
    """True when every prepared state is a parity eigenstate of the declared sector."""
    return spec.sector is not Sector.NONE


def initial_state(spec: AnsatzSpec) -> np.ndarray:
    n = spec.n_qubits
    if spec.kind is AnsatzKind.HEA:
        return sv.prepare_basis(n) if spec.hea_init == "zero" else sv.prepare_plus(n)
    return sv.prepare_sector(n, "odd" if spec.sector is Sector.ODD else "even")


def gate_program(spec: AnsatzSpec) -> list[list[Gate]]:
    """The circuit as explicit gates, grouped by layer."""
    n = spec.n_qubits
    J = spec.graph.J
    per = _per_layer(spec)
    layers = []
    for k in range(spec.p):
        off = k * per
        gates = []
        if spec.kind is AnsatzKind.HVA:
            gates += [Gate("rzz", (e.i, e.j), off, -J) for e in spec.graph.edges]
            gates += [Gate("rx", (i,), off + 1, -1.0) for i in range(n)]
        elif spec.kind is AnsatzKind.BOND_HVA:
            ne = len(spec.graph.edges)
            gates += [Gate("rzz", (e.i, e.j), off + m, 1.0)
                      for m, e in enumerate(spec.graph.edges)]
            gates += [Gate("rx", (i,), off + ne, -1.0) for i in range(n)]
        else:
            for i in range(n):
                gates.append(Gate("ry", (i,), off + i, 1.0))
                gates.append(Gate("rz", (i,), off + n + i, 1.0))
            gates += [Gate("cnot", (i, i + 1), -1, 0.0) for i in range(n - 1)]
        layers.append(gates)
    if spec.mixing:
        layers[0].insert(0, Gate("ry", (0,), spec.p * per, 1.0))
    return layers


def gate_counts(spec: AnsatzSpec) -> dict[str, int]:
    """Gate tallies of the emitted program; ``cnot`` counts 2 per ZZ rotation."""
    counts = {"rzz": 0, "rx": 0, "ry": 0, "rz": 0, "cnot_gates": 0}
    for layer in gate_program(spec):
        for g in layer:
            key = "cnot_gates" if g.name == "cnot" else g.name
            counts[key] += 1
    counts["cnot"] = 2 * counts["rzz"] + counts["cnot_gates"]
    return counts


_APPLY = {
    "rzz": lambda psi, q, a: sv.apply_rzz(psi, q[0], q[1], a),
    "rx": lambda psi, q, a: sv.apply_rx(psi, q[0], a),
    "ry": lambda psi, q, a: sv.apply_ry(psi, q[0], a),
    "rz": lambda psi, q, a: sv.apply_rz(psi, q[0], a),
    "cnot": lambda psi, q, a: sv.apply_cnot(psi, q[0], q[1]),
}


def apply_gate(psi: np.ndarray, gate: Gate, theta, shift: float = 0.0) -> np.ndarray:
    angle = 0.0 if gate.param < 0 else gate.coeff * theta[gate.param] + shift
    return _APPLY[gate.name](psi, gate.qubits, angle)


def run_program(spec: AnsatzSpec, theta) -> np.ndarray:
    """Gate-by-gate execution (reference path; prepare_state is the fast one)."""
    psi = initial_state(spec)
    for layer in gate_program(spec):
        for g in layer:
            apply_gate(psi, g, theta)
    return psi


@lru_cache(maxsize=64)
def bond_sum_diagonal(graph: LatticeGraph) -> np.ndarray:
    """sum_edges s_i s_j for every basis state (int16)."""
    from .hamiltonian import _zz_diagonal
    return _zz_diagonal(graph.n_sites, graph.pairs(), 1)


@lru_cache(maxsize=64)
def _pair_array(graph: LatticeGraph) -> np.ndarray:
    return np.array(graph.pairs(), dtype=np.int64).reshape(-1, 2)


def _check_theta(spec, theta):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (spec.n_params,):
        raise ValueError(f"{spec.kind.value} p={spec.p} expects {spec.n_params} "
                         f"parameters, got shape {theta.shape}")
    return theta


def _apply_layer(spec, psi, theta, k, inverse=False):
    sgn = -1.0 if inverse else 1.0
    per = _per_layer(spec)
    off = k * per
    n = spec.n_qubits
    if inverse:
        K.mixer(psi, n, -theta[off + per - 1])
    if spec.kind is AnsatzKind.HVA:
        K.diag_phase(psi, bond_sum_diagonal(spec.graph), sgn * -spec.graph.J * theta[off])
    else:
        K.bond_phase(psi, _pair_array(spec.graph), sgn * theta[off:off + per - 1])
    if not inverse:
        K.mixer(psi, n, theta[off + per - 1])
    return psi


def prepare_state(spec: AnsatzSpec, theta) -> np.ndarray:
    theta = _check_theta(spec, theta)
    if spec.kind is AnsatzKind.HEA:
        return run_program(spec, theta)
    psi = initial_state(spec)
    if spec.mixing:
        sv.apply_ry(psi, 0, theta[-1])
    for k in range(spec.p):
        _apply_layer(spec, psi, theta, k)
    return psi


def _generator(psi, gate):
    out = psi.copy()
    if gate.name == "rzz":
        out *= sv.z_parity(sv.n_qubits_of(psi), *gate.qubits)
    elif gate.name == "rx":
        sv.apply_x(out, gate.qubits[0])
    elif gate.name == "ry":
        sv.apply_z(out, gate.qubits[0])
        sv.apply_x(out, gate.qubits[0])
        out *= 1j  # Y = i X Z
    elif gate.name == "rz":
        sv.apply_z(out, gate.qubits[0])
    return out


def _add_penalty(lam, psi, penalty):
    for w, v in penalty:
        lam += (w * np.vdot(v, psi)) * v
    return lam


def _program_energy_gradient(spec, theta, H, penalty):
    psi = run_program(spec, theta)
    final = psi.copy()
    lam = _add_penalty(H.matvec(psi), psi, penalty)
    energy = float(np.vdot(psi, lam).real)
    grad = np.zeros_like(theta)
    for layer in reversed(gate_program(spec)):
        for g in reversed(layer):
            if g.param >= 0:
                grad[g.param] += 2.0 * g.coeff * np.vdot(lam, _generator(psi, g)).imag
                inv = g._replace(coeff=-g.coeff)
                apply_gate(psi, inv, theta)
                apply_gate(lam, inv, theta)
            else:  # cnot is self-inverse
                apply_gate(psi, g, theta)
                apply_gate(lam, g, theta)
    return energy, grad, final


def energy_and_gradient(spec: AnsatzSpec, theta, H, penalty=()):
    """Objective, exact gradient (adjoint differentiation) and the prepared state.

    The objective is ``<psi|H|psi> + sum_w w |<v|psi>|^2`` over ``penalty``
    pairs ``(w, v)``; both terms are handled as one effective operator.
    """
    theta = _check_theta(spec, theta)
    if spec.kind is AnsatzKind.HEA:
        return _program_energy_gradient(spec, theta, H, penalty)
    n = spec.n_qubits
    psi = prepare_state(spec, theta)
    final = psi.copy()
    lam = K.apply_h(psi, H.zz_diagonal(), H.h, n, np.empty_like(psi))
    _add_penalty(lam, psi, penalty)
    energy = float(np.vdot(psi, lam).real)
    grad = np.zeros_like(theta)
    per = _per_layer(spec)
    pairs = _pair_array(spec.graph)
    bonds = bond_sum_diagonal(spec.graph)
    buf = np.empty(len(pairs))
    for k in reversed(range(spec.p)):
        off = k * per
        beta = theta[off + per - 1]
        grad[off + per - 1] = -2.0 * K.imag_vdot_xsum(lam, psi, n)
        K.mixer(psi, n, -beta)
        K.mixer(lam, n, -beta)
        if spec.kind is AnsatzKind.HVA:
            a = -spec.graph.J * theta[off]
            grad[off] = 2.0 * -spec.graph.J * K.imag_vdot_diag(lam, psi, bonds)
            K.diag_phase(psi, bonds, -a)
            K.diag_phase(lam, bonds, -a)
        else:
            grad[off:off + per - 1] = 2.0 * K.imag_vdot_bonds(lam, psi, pairs, buf)
            K.bond_phase(psi, pairs, -theta[off:off + per - 1])
            K.bond_phase(lam, pairs, -theta[off:off + per - 1])
    if spec.mixing:
        grad[-1] = 2.0 * np.vdot(lam, _generator(psi, Gate("ry", (0,), -1, 1.0))).imag
    return energy, grad, final


def pad_parameters(spec_from: AnsatzSpec, theta, spec_to: AnsatzSpec) -> np.ndarray:
    """Embed depth-p parameters into a deeper spec; the extra layers are identities."""
    if spec_from.kind is not spec_to.kind or spec_to.p < spec_from.p:
        raise ValueError("can only pad into a deeper circuit of the same kind")
    theta = _check_theta(spec_from, theta)
    out = np.zeros(spec_to.n_params)
    body = spec_from.p * _per_layer(spec_from)
    out[:body] = theta[:body]
    if spec_to.mixing:
        out[-1] = theta[-1] if spec_from.mixing else 0.0
    return out


def hva_to_bond(spec: AnsatzSpec, theta) -> tuple[AnsatzSpec, np.ndarray]:
    """The bond-resolved point reproducing an HVA state exactly."""
    if spec.kind is not AnsatzKind.HVA:
        raise ValueError("expected an HVA spec")
    ne = len(spec.graph.edges)
    bond = AnsatzSpec(AnsatzKind.BOND_HVA, spec.graph, spec.p, spec.sector)
    out = np.empty(bond.n_params)
    for k in range(spec.p):
        off = k * (ne + 1)
        out[off:off + ne] = -spec.graph.J * theta[2 * k]
        out[off + ne] = theta[2 * k + 1]
    if spec.mixing:
        out[-1] = theta[-1]
    return bond, out


# ---------------------------------------------------------------------------
# parameter files
# ---------------------------------------------------------------------------

def save_parameters(spec: AnsatzSpec, theta, path) -> None:
    theta = _check_theta(spec, theta)
    doc = {
        "format": "frustrated-tfim-params/1",
        "kind": spec.kind.value,
        "L": spec.graph.L,
        "frustrated": spec.graph.spec.frustrated,
        "coupling": spec.graph.spec.coupling.value,
        "p": spec.p,
        "sector": spec.sector.value,
        "hea_init": spec.hea_init,
        "edge_hash": spec.graph.edge_hash(),
        "layout": [[s.layer, s.role, list(s.target)] for s in parameter_layout(spec)],
        "values": [float(x) for x in theta],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_parameters(path) -> tuple[AnsatzSpec, np.ndarray]:
    doc = json.loads(Path(path).read_text())
    graph = build_lattice(LatticeSpec(doc["L"], doc["frustrated"], Coupling(doc["coupling"])))
    if graph.edge_hash() != doc["edge_hash"]:
        raise ValueError(f"{path}: edge ordering differs from this build")
    spec = AnsatzSpec(AnsatzKind(doc["kind"]), graph, doc["p"], Sector(doc["sector"]),
                      doc.get("hea_init", "zero"))
    theta = np.array(doc["values"], dtype=np.float64)
    return spec, _check_theta(spec, theta)


def random_parameters(spec: AnsatzSpec, rng, scale: float = 0.1) -> np.ndarray:
    """Uniform angles in [-scale, scale]; a sector-mixing angle is uniform in [0, pi/2].

    The mixing angle sets the even/odd weight of the initial state, so a wide
    draw lets different restarts begin in either sector.
    """
    theta = rng.uniform(-scale, scale, spec.n_params)
    if spec.mixing:
        theta[-1] = rng.uniform(0.0, math.pi / 2)
    return theta


def cnots(spec: AnsatzSpec) -> int:
    return cnot_count(spec.kind, spec.graph, spec.p)


SHIFT = math.pi / 4
