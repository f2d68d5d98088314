import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from frustrated_tfim import ansatz as az
from frustrated_tfim import statevector as sv
from frustrated_tfim.hamiltonian import IsingHamiltonian, parity_expectation
from frustrated_tfim.lattice import AnsatzKind, lattice
from frustrated_tfim.variational import gradient_parameter_shift
from oracles import X, Y, Z, embed, square_edges

G2, G3 = lattice(2), lattice(3)
HVA, BOND, HEA = AnsatzKind.HVA, AnsatzKind.BOND_HVA, AnsatzKind.HEA


def thetas(spec, seed, scale=1.5):
    return az.random_parameters(spec, np.random.default_rng(seed), scale)


def test_parameter_counts():
    assert az.AnsatzSpec(HVA, G3, 8).n_params == 16
    assert az.AnsatzSpec(BOND, G3, 6).n_params == 6 * 17 == 102
    assert az.AnsatzSpec(HEA, G2, 2).n_params == 16
    assert az.AnsatzSpec(BOND, G2, 3, "none").n_params == 3 * 6 + 1
    layout = az.parameter_layout(az.AnsatzSpec(BOND, G2, 1))
    assert [s.role for s in layout] == ["gamma_ij"] * 5 + ["beta"]
    assert layout[0].target == (0, 1)


def test_spec_validation():
    with pytest.raises(ValueError):
        az.AnsatzSpec(HVA, G2, 0)
    with pytest.raises(ValueError):
        az.AnsatzSpec(HEA, G2, 1, "even")
    with pytest.raises(ValueError):
        az.AnsatzSpec(HEA, G2, 1, hea_init="random")
    with pytest.raises(ValueError):
        az.prepare_state(az.AnsatzSpec(HVA, G2, 2), np.zeros(3))


def test_hva_matches_dense_exponentials():
    """exp(-i b H_X) exp(-i g H_ZZ) layers built from full matrices."""
    n = 4
    hzz = sum(embed({i: Z, j: Z}, n) for i, j in square_edges(2)) * 1.0   # -J = +1
    hx = -sum(embed({i: X}, n) for i in range(n))
    theta = np.array([0.3, -0.7, 1.1, 0.25])
    psi = np.full(16, 0.25, dtype=complex)
    for g, b in theta.reshape(-1, 2):
        psi = expm(-1j * b * hx) @ expm(-1j * g * hzz) @ psi
    spec = az.AnsatzSpec(HVA, G2, 2)
    assert np.abs(az.prepare_state(spec, theta) - psi).max() < 1e-12
    assert np.abs(az.run_program(spec, theta) - psi).max() < 1e-12


def test_hea_matches_dense_gates():
    n = 4
    theta = thetas(az.AnsatzSpec(HEA, G2, 1), 3)
    U = np.eye(16, dtype=complex)
    for i in range(n):
        U = expm(-1j * theta[n + i] * embed({i: Z}, n)) @ expm(-1j * theta[i] * embed({i: Y}, n)) @ U
    from oracles import cnot_matrix
    for i in range(n - 1):
        U = cnot_matrix(n, i, i + 1) @ U
    psi = U[:, 0]
    out = az.prepare_state(az.AnsatzSpec(HEA, G2, 1), theta)
    assert np.abs(out - psi).max() < 1e-12


def test_zero_angles_give_initial_state():
    for sector in ("even", "odd"):
        spec = az.AnsatzSpec(BOND, G3, 3, sector)
        assert np.abs(az.prepare_state(spec, np.zeros(spec.n_params))
                      - sv.prepare_sector(9, sector)).max() < 1e-14
    spec = az.AnsatzSpec(HEA, G2, 2)
    assert np.array_equal(az.prepare_state(spec, np.zeros(16)), sv.prepare_basis(4))
    spec = az.AnsatzSpec(HEA, G2, 1, hea_init="plus")
    assert np.allclose(az.prepare_state(spec, np.zeros(8)), sv.prepare_plus(4))


@given(seed=st.integers(0, 2**32 - 1))
def test_hva_equals_bond_hva_with_equal_angles(seed):
    spec = az.AnsatzSpec(HVA, G3, 3)
    theta = thetas(spec, seed)
    bond, theta_b = az.hva_to_bond(spec, theta)
    assert np.abs(az.prepare_state(spec, theta) - az.prepare_state(bond, theta_b)).max() < 1e-12


@pytest.mark.parametrize("kind", [HVA, BOND])
@pytest.mark.parametrize("sector,sign", [("even", 1.0), ("odd", -1.0)])
def test_sector_confinement(kind, sector, sign):
    spec = az.AnsatzSpec(kind, G2, 3, sector)
    assert az.preserves_parity(spec)
    rng = np.random.default_rng(0)
    for _ in range(100):
        psi = az.prepare_state(spec, az.random_parameters(spec, rng, 3.0))
        assert parity_expectation(psi) == pytest.approx(sign, abs=1e-12)
        assert sv.norm(psi) == pytest.approx(1.0, abs=1e-12)


def test_mixing_sector_weights():
    spec = az.AnsatzSpec(BOND, G2, 2, "none")
    assert not az.preserves_parity(spec)
    theta = thetas(spec, 5)
    for phi in (0.0, 0.4, np.pi / 4, 1.3):
        theta[-1] = phi
        assert parity_expectation(az.prepare_state(spec, theta)) == pytest.approx(
            np.cos(2 * phi), abs=1e-12)


def test_hea_breaks_parity():
    spec = az.AnsatzSpec(HEA, G2, 2)
    assert not az.preserves_parity(spec)
    vals = [abs(parity_expectation(az.prepare_state(spec, thetas(spec, s)))) for s in range(10)]
    assert min(vals) < 1 - 1e-3


@pytest.mark.parametrize("kind,L,p,cnot", [
    (HVA, 3, 1, 32), (HVA, 3, 6, 192), (BOND, 3, 6, 192), (BOND, 2, 1, 10),
    (HEA, 2, 2, 6), (HVA, 4, 24, 2 * 24 * 33),
])
def test_gate_counts_match_published_values(kind, L, p, cnot):
    spec = az.AnsatzSpec(kind, lattice(L), p)
    counts = az.gate_counts(spec)
    assert counts["cnot"] == cnot == az.cnots(spec)
    if kind is HEA:
        assert counts["ry"] == counts["rz"] == p * L * L and counts["rzz"] == 0
    else:
        assert counts["rx"] == p * L * L and counts["rzz"] == p * len(spec.graph.edges)


def test_program_is_deterministic():
    spec = az.AnsatzSpec(BOND, G3, 2)
    assert az.gate_program(spec) == az.gate_program(az.AnsatzSpec(BOND, lattice(3), 2))
    theta = thetas(spec, 1)
    assert np.array_equal(az.prepare_state(spec, theta), az.prepare_state(spec, theta))


@pytest.mark.parametrize("kind,sector", [(HVA, "even"), (BOND, "odd"), (BOND, "none"),
                                         (HVA, "none"), (HEA, None)])
def test_adjoint_gradient_matches_parameter_shift(kind, sector):
    spec = az.AnsatzSpec(kind, G2, 2, sector)
    H = IsingHamiltonian(G2, 0.9)
    theta = thetas(spec, 11)
    energy, grad, psi = az.energy_and_gradient(spec, theta, H)
    assert energy == pytest.approx(np.vdot(psi, H.matvec(psi)).real, abs=1e-12)
    assert np.abs(grad - gradient_parameter_shift(spec, theta, H)).max() < 1e-8


def test_penalty_gradient():
    spec = az.AnsatzSpec(BOND, G2, 2, "none")
    H = IsingHamiltonian(G2, 0.9)
    v = az.prepare_state(spec, thetas(spec, 2))
    theta = thetas(spec, 3)
    pen = [(3.0, v)]
    f, g, psi = az.energy_and_gradient(spec, theta, H, pen)
    assert f == pytest.approx(np.vdot(psi, H.matvec(psi)).real + 3 * sv.fidelity(v, psi))
    eps = 1e-6
    fd = np.array([(az.energy_and_gradient(spec, theta + eps * e, H, pen)[0]
                    - az.energy_and_gradient(spec, theta - eps * e, H, pen)[0]) / (2 * eps)
                   for e in np.eye(spec.n_params)])
    assert np.abs(g - fd).max() < 1e-7


def test_pad_parameters_preserves_state():
    short = az.AnsatzSpec(BOND, G2, 2, "none")
    deep = short.with_depth(4)
    theta = thetas(short, 4)
    padded = az.pad_parameters(short, theta, deep)
    assert padded.shape == (deep.n_params,)
    assert np.abs(az.prepare_state(short, theta) - az.prepare_state(deep, padded)).max() < 1e-12
    with pytest.raises(ValueError):
        az.pad_parameters(deep, padded, short)
    with pytest.raises(ValueError):
        az.pad_parameters(short, theta, az.AnsatzSpec(HVA, G2, 4))


def test_parameter_file_roundtrip(tmp_path):
    spec = az.AnsatzSpec(BOND, G3, 2, "odd")
    theta = thetas(spec, 8)
    az.save_parameters(spec, theta, tmp_path / "p.json")
    spec2, theta2 = az.load_parameters(tmp_path / "p.json")
    assert spec2 == spec and np.array_equal(theta, theta2)


def test_random_parameters_range():
    spec = az.AnsatzSpec(HVA, G2, 5, "none")
    theta = az.random_parameters(spec, np.random.default_rng(0), 0.2)
    assert np.all(np.abs(theta[:-1]) <= 0.2) and 0 <= theta[-1] <= np.pi / 2
