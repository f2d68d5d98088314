import pytest

from frustrated_tfim.lattice import (AnsatzKind, Coupling, EdgeKind, LatticeSpec, build_lattice,
                                     cnot_count, expected_edge_count, lattice)
from oracles import square_edges


@pytest.mark.parametrize("L,frustrated,count", [(5, True, 56), (3, True, 16), (3, False, 12),
                                                (2, True, 5)])
def test_edge_counts_from_examples(L, frustrated, count):
    assert len(lattice(L, frustrated).edges) == count


@pytest.mark.parametrize("L", range(2, 9))
@pytest.mark.parametrize("frustrated", [True, False])
def test_edge_count_formula_matches_enumeration(L, frustrated):
    g = lattice(L, frustrated)
    assert len(g.edges) == expected_edge_count(L, frustrated)
    assert g.pairs() == square_edges(L, frustrated)


@pytest.mark.parametrize("L", range(2, 7))
def test_edges_are_valid_unique_and_ordered(L):
    g = lattice(L)
    pairs = g.pairs()
    assert len(set(pairs)) == len(pairs)
    assert all(0 <= i < j < L * L for i, j in pairs)
    kinds = [e.kind for e in g.edges]
    blocks = [EdgeKind.HORIZONTAL, EdgeKind.VERTICAL, EdgeKind.DIAGONAL]
    assert kinds == sorted(kinds, key=blocks.index)
    for e in g.edges:
        (r1, c1), (r2, c2) = g.site(e.i), g.site(e.j)
        step = {EdgeKind.HORIZONTAL: (0, 1), EdgeKind.VERTICAL: (1, 0),
                EdgeKind.DIAGONAL: (1, 1)}[e.kind]
        assert (r2 - r1, c2 - c1) == step
    assert build_lattice(LatticeSpec(L)) == g


def test_plaquettes_split_into_two_triangles():
    L = 4
    g = lattice(L)
    pairs = set(g.pairs())
    for r in range(L - 1):
        for c in range(L - 1):
            a, b, d, e = r * L + c, r * L + c + 1, (r + 1) * L + c, (r + 1) * L + c + 1
            assert (a, e) in pairs and (b, d) not in pairs
            for tri in ((a, b, e), (a, d, e)):
                assert all(tuple(sorted(p)) in pairs for p in ((tri[0], tri[1]), (tri[1], tri[2]),
                                                              (tri[0], tri[2])))


@pytest.mark.parametrize("L", [0, 1, -3])
def test_rejects_degenerate_lattice(L):
    with pytest.raises(ValueError):
        LatticeSpec(L)


def test_coupling_sign():
    assert Coupling.AFM.J == -1.0 and Coupling.FM.J == 1.0
    assert lattice(3).J == -1.0 and lattice(3, coupling="fm").J == 1.0


@pytest.mark.parametrize("kind,L,p,expected", [
    ("bond_hva", 2, 1, 10), ("hva", 3, 1, 32), ("hva", 3, 6, 192), ("hva", 3, 24, 768),
    ("bond_hva", 4, 12, 792), ("hea", 2, 2, 6)])
def test_cnot_counts_match_published_values(kind, L, p, expected):
    assert cnot_count(kind, lattice(L), p) == expected


@pytest.mark.parametrize("L", [2, 3, 4])
@pytest.mark.parametrize("p", [1, 3, 8])
def test_cnot_count_independent_of_parametrization(L, p):
    g = lattice(L)
    assert cnot_count(AnsatzKind.HVA, g, p) == cnot_count(AnsatzKind.BOND_HVA, g, p)


def test_cnot_count_rejects_zero_depth():
    with pytest.raises(ValueError):
        cnot_count("hva", lattice(3), 0)


def test_text_export_and_hash():
    g = lattice(2)
    text = g.to_text()
    assert "edge,i,j,kind" in text and "4,0,3,diagonal" in text
    assert g.edge_hash() == lattice(2).edge_hash() != lattice(2, False).edge_hash()
