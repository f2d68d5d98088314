"""L x L open-boundary square lattice, optionally with one diagonal bond per plaquette.

Sites are numbered row-major, ``(r, c) -> r * L + c``.  Edges come in three
blocks (horizontal, vertical, diagonal), each row-major, and the diagonal of
plaquette ``(r, c)`` always joins ``(r, c)`` to ``(r + 1, c + 1)``.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field


class EdgeKind(str, enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    DIAGONAL = "diagonal"


class Coupling(str, enum.Enum):
    AFM = "afm"
    FM = "fm"

    @property
    def J(self) -> float:
        return -1.0 if self is Coupling.AFM else 1.0


class AnsatzKind(str, enum.Enum):
    HVA = "hva"
    BOND_HVA = "bond_hva"
    HEA = "hea"


@dataclass(frozen=True)
class LatticeSpec:
    L: int
    frustrated: bool = True
    coupling: Coupling = Coupling.AFM

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ValueError(f"lattice side must be an integer >= 2, got {self.L}")
        object.__setattr__(self, "coupling", Coupling(self.coupling))

    @property
    def J(self) -> float:
        return self.coupling.J

    @property
    def n_sites(self) -> int:
        return self.L * self.L


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    kind: EdgeKind


@dataclass(frozen=True)
class LatticeGraph:
    spec: LatticeSpec
    edges: tuple[Edge, ...]
    n_sites: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_sites", self.spec.n_sites)

    @property
    def L(self) -> int:
        return self.spec.L

    @property
    def J(self) -> float:
        return self.spec.J

    def pairs(self) -> list[tuple[int, int]]:
        return [(e.i, e.j) for e in self.edges]

    def site(self, index: int) -> tuple[int, int]:
        return divmod(index, self.L)

    def edge_hash(self) -> str:
        """Short digest of the ordered edge list, embedded in parameter files."""
        text = ";".join(f"{e.i}-{e.j}-{e.kind.value}" for e in self.edges)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_text(self) -> str:
        """Plain-text export: a site block then an edge block."""
        lines = [
            f"# L={self.L} frustrated={self.spec.frustrated} J={self.J:+g}",
            "# site index = row * L + col",
            "site,row,col",
        ]
        lines += [f"{k},{r},{c}" for k in range(self.n_sites) for r, c in [self.site(k)]]
        lines.append("edge,i,j,kind")
        lines += [f"{n},{e.i},{e.j},{e.kind.value}" for n, e in enumerate(self.edges)]
        return "\n".join(lines) + "\n"


def build_lattice(spec: LatticeSpec) -> LatticeGraph:
    L = spec.L
    idx = lambda r, c: r * L + c  # noqa: E731
    edges = [Edge(idx(r, c), idx(r, c + 1), EdgeKind.HORIZONTAL)
             for r in range(L) for c in range(L - 1)]
    edges += [Edge(idx(r, c), idx(r + 1, c), EdgeKind.VERTICAL)
              for r in range(L - 1) for c in range(L)]
    if spec.frustrated:
        edges += [Edge(idx(r, c), idx(r + 1, c + 1), EdgeKind.DIAGONAL)
                  for r in range(L - 1) for c in range(L - 1)]
    return LatticeGraph(spec, tuple(edges))


def lattice(L: int, frustrated: bool = True, coupling: str = "afm") -> LatticeGraph:
    """Shorthand for ``build_lattice(LatticeSpec(...))``."""
    return build_lattice(LatticeSpec(L, frustrated, Coupling(coupling)))


def expected_edge_count(L: int, frustrated: bool) -> int:
    return 2 * L * (L - 1) + ((L - 1) ** 2 if frustrated else 0)


def cnot_count(kind, graph: LatticeGraph, p: int) -> int:
    """CNOTs in a depth-``p`` circuit.

    Each ZZ rotation compiles to CNOT-Rz-CNOT; the hardware-efficient ansatz uses
    one linear-chain CNOT per neighbouring qubit pair per layer.
    """
    if p < 1:
        raise ValueError(f"depth must be >= 1, got {p}")
    kind = AnsatzKind(kind)
    if kind is AnsatzKind.HEA:
        return (graph.n_sites - 1) * p
    return 2 * len(graph.edges) * p
