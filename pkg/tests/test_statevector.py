import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from frustrated_tfim import statevector as sv
from oracles import X, Y, Z, cnot_matrix, embed, partial_trace_keep, rotation


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return v / np.linalg.norm(v)


def test_preparations():
    assert np.allclose(sv.prepare_plus(2), 0.5, atol=0)
    odd = sv.prepare_sector(4, "odd")
    assert np.allclose(odd, embed({0: Z}, 4) @ sv.prepare_plus(4))
    assert np.array_equal(sv.prepare_sector(3, "even"), sv.prepare_plus(3))
    assert sv.prepare_basis(3, 5)[5] == 1 and sv.norm(sv.prepare_basis(3, 5)) == 1
    with pytest.raises(ValueError):
        sv.prepare_sector(3, "neither")


GATES = [
    ("rx", lambda psi, q, a: sv.apply_rx(psi, q[0], a), lambda n, q, a: embed({q[0]: rotation(X, a)}, n)),
    ("ry", lambda psi, q, a: sv.apply_ry(psi, q[0], a), lambda n, q, a: embed({q[0]: rotation(Y, a)}, n)),
    ("rz", lambda psi, q, a: sv.apply_rz(psi, q[0], a), lambda n, q, a: embed({q[0]: rotation(Z, a)}, n)),
    ("rzz", lambda psi, q, a: sv.apply_rzz(psi, q[0], q[1], a),
     lambda n, q, a: expm(-1j * a * embed({q[0]: Z, q[1]: Z}, n))),
    ("cnot", lambda psi, q, a: sv.apply_cnot(psi, q[0], q[1]),
     lambda n, q, a: cnot_matrix(n, q[0], q[1])),
    ("z", lambda psi, q, a: sv.apply_z(psi, q[0]), lambda n, q, a: embed({q[0]: Z}, n)),
    ("x", lambda psi, q, a: sv.apply_x(psi, q[0]), lambda n, q, a: embed({q[0]: X}, n)),
]


@pytest.mark.parametrize("name,kernel,dense", GATES, ids=[g[0] for g in GATES])
@given(seed=st.integers(0, 2**32 - 1), angle=st.floats(-7, 7), data=st.data())
def test_gates_match_kronecker_definition(name, kernel, dense, seed, angle, data):
    n = data.draw(st.integers(2, 4))
    q = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    psi = random_state(n, seed)
    expected = dense(n, q, angle) @ psi
    out = kernel(psi.copy(), q, angle)
    assert np.abs(out - expected).max() < 1e-13
    assert abs(sv.norm(out) - 1) < 1e-12


def test_gate_argument_errors():
    psi = sv.prepare_plus(3)
    with pytest.raises(IndexError):
        sv.apply_rx(psi, 3, 0.1)
    with pytest.raises(IndexError):
        sv.apply_z(psi, -1)
    with pytest.raises(ValueError):
        sv.apply_rzz(psi, 1, 1, 0.1)
    with pytest.raises(ValueError):
        sv.apply_cnot(psi, 2, 2)


def test_gate_identities():
    psi = random_state(4, 7)
    phi = psi.copy()
    sv.apply_rzz(phi, 0, 2, 0.0)
    assert np.array_equal(phi, psi)
    sv.apply_rzz(phi, 0, 2, 0.37)
    sv.apply_rzz(phi, 0, 2, -0.37)
    assert np.abs(phi - psi).max() < 1e-12
    sv.apply_cnot(phi, 3, 1)
    sv.apply_cnot(phi, 3, 1)
    assert np.abs(phi - psi).max() < 1e-12


@given(beta=st.floats(-7, 7))
def test_rx_leaves_plus_invariant(beta):
    psi = sv.prepare_plus(3)
    out = sv.apply_rx(psi.copy(), 1, beta)
    assert sv.fidelity(out, psi) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(out, np.exp(-1j * beta) * psi, atol=1e-12)


def test_disjoint_rzz_commute():
    psi = random_state(4, 3)
    a = sv.apply_rzz(sv.apply_rzz(psi.copy(), 0, 1, 0.3), 2, 3, -1.1)
    b = sv.apply_rzz(sv.apply_rzz(psi.copy(), 2, 3, -1.1), 0, 1, 0.3)
    assert np.abs(a - b).max() < 1e-13


@pytest.mark.parametrize("beta", [0.0, 0.3, -1.2, 2.5])
def test_mixer_matches_expm(beta):
    psi = random_state(3, 11)
    hx = -sum(embed({i: X}, 3) for i in range(3))
    expected = expm(-1j * beta * hx) @ psi
    out = sv.apply_mixer(psi.copy(), beta)
    assert np.abs(out - expected).max() < 1e-12


def test_x_sum():
    psi = random_state(4, 2)
    assert np.allclose(sv.apply_x_sum(psi), sum(embed({i: X}, 4) for i in range(4)) @ psi,
                       atol=1e-14)


def test_overlaps():
    psi = random_state(4, 1)
    assert sv.fidelity(psi, psi) == pytest.approx(1.0, abs=1e-14)
    assert sv.fidelity(np.exp(0.7j) * psi, psi) == pytest.approx(1.0, abs=1e-14)
    assert sv.fidelity(sv.prepare_basis(5), sv.prepare_plus(5)) == pytest.approx(2.0 ** -5)
    with pytest.raises(ValueError):
        sv.inner(psi, sv.prepare_plus(3))


def test_bad_state_length():
    with pytest.raises(ValueError):
        sv.n_qubits_of(np.ones(6))


# reduced density matrices -------------------------------------------------

@given(seed=st.integers(0, 2**32 - 1), data=st.data())
def test_reduced_density_matches_full_partial_trace(seed, data):
    n = data.draw(st.integers(2, 5))
    keep = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n - 1, unique=True))
    psi = random_state(n, seed)
    rho = sv.reduced_density(psi, keep)
    ref = partial_trace_keep(psi, sorted(keep), n)
    assert np.abs(rho - ref).max() < 1e-13
    w = np.linalg.eigvalsh(rho)
    assert abs(w.sum() - 1) < 1e-10 and w.min() > -1e-10 and w.max() < 1 + 1e-10
    assert np.abs(rho - rho.conj().T).max() < 1e-12


def test_reduced_density_examples():
    prod = np.kron(np.array([0.6, 0.8]), sv.prepare_plus(2)).astype(complex)
    rho = sv.reduced_density(prod, [0, 1])
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-10)
    bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    assert np.allclose(sv.reduced_density(bell, [0]), np.eye(2) / 2, atol=1e-15)
    assert np.allclose(sv.reduced_density(bell, 0b10), np.eye(2) / 2, atol=1e-15)
    assert sv.von_neumann_entropy(sv.reduced_density(bell, [1])) == pytest.approx(1.0)
    for bad in ([], [0, 1], 0, 0b11):
        with pytest.raises(ValueError):
            sv.reduced_density(bell, bad)
    with pytest.raises(IndexError):
        sv.reduced_density(bell, [2])


def test_ground_state_entropy_matches_oracle(spectrum):
    psi = spectrum(3, 0.5).eigenvectors[0]
    keep = sv.default_half_cut(9)
    assert keep == [0, 1, 2, 3, 4]
    ref = partial_trace_keep(psi, keep, 9)
    w = np.linalg.eigvalsh(ref)
    w = w[w > 1e-12]
    s_ref = float(-(w * np.log2(w)).sum())
    assert sv.von_neumann_entropy(sv.reduced_density(psi, keep)) == pytest.approx(s_ref, abs=1e-10)


# magnetization ---------------------------------------------------------------

def test_magnetization_examples(spectrum):
    assert sv.magnetization_moments(sv.prepare_plus(6)) == pytest.approx((0.0, 6.0), abs=1e-12)
    assert sv.magnetization_moments(sv.prepare_basis(9)) == pytest.approx((9.0, 81.0))
    m1, _ = sv.magnetization_moments(spectrum(3, 1.0).eigenvectors[0])
    assert abs(m1) < 1e-10
    assert abs(sv.magnetization_moments(sv.prepare_sector(5, "odd"))[0]) < 1e-12


@given(seed=st.integers(0, 2**32 - 1))
def test_magnetization_matches_operator(seed):
    n = 4
    psi = random_state(n, seed)
    M = sum(embed({i: Z}, n) for i in range(n))
    m1, m2 = sv.magnetization_moments(psi)
    assert m1 == pytest.approx(np.vdot(psi, M @ psi).real, abs=1e-12)
    assert m2 == pytest.approx(np.vdot(psi, M @ M @ psi).real, abs=1e-12)
    assert m2 >= m1 ** 2 - 1e-12


def test_amplitude_dump_roundtrip(tmp_path):
    psi = random_state(5, 9)
    path = tmp_path / "psi.bin"
    sv.dump_amplitudes(psi, path)
    data = path.read_bytes()
    assert len(data) == 32 * 16
    assert np.frombuffer(data[:8], "<f8")[0] == psi[0].real
    assert np.array_equal(sv.load_amplitudes(path), psi)
    path.write_bytes(data[:-3])
    with pytest.raises(ValueError):
        sv.load_amplitudes(path)
