import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PAULI, kron_ground_state, kron_hamiltonian, kron_op
from toricnqs import CapacityError, InvalidArgument, build_lattice, central_square_region, kernels
from toricnqs.ed import (
    HamiltonianOperator,
    all_configurations,
    apply_pauli_string,
    configs_to_index,
    exact_expectation,
    exact_ground_state,
    index_to_configs,
    pauli_expectation,
    renyi2_exact,
)
from toricnqs.observables import BFFMSpec, Region

# ground-state energies of the Kronecker-product oracle (ARPACK / dense eigh)
E0 = {
    (2, (0.2, 0.0, 0.2)): -5.318843675407898,
    (2, (0.2, 0.3, 0.2)): -5.381583815197101,
    (3, (0.2, 0.0, 0.2)): -13.602573805307577,
    (3, (0.2, 0.3, 0.2)): -13.772551429006702,
    (3, (0.2, 0.0, 0.0)): -13.484642599215013,
    (3, (0.0, 0.0, 0.4)): -13.534473886361903,
}
# perimeter-4 O_Z and central-plaquette S_2 from the same oracle
OZ_L3 = {(0.2, 0.0, 0.2): 0.029924021731928024, (0.0, 0.0, 0.4): 0.1549580339765819}
S2_L3 = {(0.2, 0.0, 0.2): 0.9189798811298435, (0.0, 0.0, 0.4): 1.229468384994708}


@pytest.mark.parametrize("key", sorted(E0))
def test_energy_regression(key):
    L, h = key
    st_ = exact_ground_state(build_lattice(L), h)
    assert st_.energy == pytest.approx(E0[key], abs=1e-9)
    assert st_.residual < 1e-8


@pytest.mark.parametrize("h", [(0.2, 0.0, 0.2), (0.2, 0.3, 0.2)])
def test_dense_and_iterative_agree(h):
    g = build_lattice(3)
    a = exact_ground_state(g, h, method="iterative")
    b = exact_ground_state(g, h, method="dense") if h[1] == 0 else a
    assert a.energy == pytest.approx(b.energy, abs=1e-10)
    assert abs(abs(np.vdot(a.vector, b.vector)) - 1) < 1e-8
    _, v = kron_ground_state(3, *h)
    assert abs(abs(np.vdot(a.vector, v)) - 1) < 1e-8


def test_dense_matrix_matches_oracle():
    h = (0.3, -0.2, 0.1)
    np.testing.assert_allclose(HamiltonianOperator(build_lattice(2), h).dense(),
                               kron_hamiltonian(2, *h).toarray(), atol=1e-14)


def test_sparse_matches_matvec(rng):
    op = HamiltonianOperator(build_lattice(3), (0.2, 0.3, 0.2))
    x = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    np.testing.assert_allclose(op.sparse() @ x, op.matvec(x), atol=1e-12)
    np.testing.assert_allclose(op.matvec(x), kron_hamiltonian(3, 0.2, 0.3, 0.2) @ x, atol=1e-12)


@pytest.mark.parametrize("hy", [0.0, 0.3])
def test_kernel_flavours_agree(rng, hy):
    g = build_lattice(3)
    op = HamiltonianOperator(g, (0.2, hy, 0.2))
    n = g.n_edges
    d1 = kernels.hamiltonian_diagonal_numba(n, op.plaquette_masks, 0.2)
    d2 = kernels.hamiltonian_diagonal_numpy(n, op.plaquette_masks, 0.2)
    np.testing.assert_allclose(d1, d2, atol=1e-14)
    x = rng.standard_normal(op.dim) + (1j * rng.standard_normal(op.dim) if hy else 0)
    args = (d1, op.vertex_masks, n, 0.2, hy)
    np.testing.assert_allclose(kernels.hamiltonian_matvec_numba(x, *args),
                               kernels.hamiltonian_matvec_numpy(x, *args), atol=1e-13)
    coo1 = kernels.hamiltonian_coo_numba(*args)
    coo2 = kernels.hamiltonian_coo_numpy(*args)
    import scipy.sparse
    m1 = scipy.sparse.coo_matrix((coo1[2], (coo1[0], coo1[1])), shape=(op.dim,) * 2).toarray()
    m2 = scipy.sparse.coo_matrix((coo2[2], (coo2[0], coo2[1])), shape=(op.dim,) * 2).toarray()
    np.testing.assert_allclose(m1, m2, atol=1e-14)


@given(st.integers(2, 4), st.data())
def test_index_roundtrip(L, data):
    n = build_lattice(L).n_edges
    idx = np.array(data.draw(st.lists(st.integers(0, 2**n - 1), min_size=1, max_size=20)))
    assert np.array_equal(configs_to_index(index_to_configs(idx, n)), idx)


def test_basis_convention():
    S = all_configurations(build_lattice(2))
    assert np.array_equal(S[0], [1, 1, 1, 1])
    assert np.array_equal(S[1], [-1, 1, 1, 1])
    assert np.array_equal(S[0b1010], [1, -1, 1, -1])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from("XYZ"), min_size=4, max_size=4), st.lists(st.booleans(), min_size=4, max_size=4))
def test_pauli_string_matches_kron(ops, use):
    string = [(i, o) for i, (o, u) in enumerate(zip(ops, use)) if u]
    if not string:
        return
    rng = np.random.default_rng(len(string))
    v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    P = kron_op(4, {e: PAULI[o] for e, o in string})
    np.testing.assert_allclose(apply_pauli_string(v, 4, string), P @ v, atol=1e-14)


def test_pauli_validation():
    st_ = exact_ground_state(build_lattice(2), (0.2, 0, 0.2))
    for bad in ([], [(0, "X"), (0, "Z")], [(7, "Z")], [(0, "W")]):
        with pytest.raises(InvalidArgument):
            pauli_expectation(st_, bad)


@pytest.mark.parametrize("h", sorted(OZ_L3))
def test_bffm_and_renyi_constants(h):
    g = build_lattice(3)
    st_ = exact_ground_state(g, h)
    assert exact_expectation(st_, BFFMSpec(4, "primal")) == pytest.approx(OZ_L3[h], abs=1e-9)
    assert exact_expectation(st_, Region(tuple(central_square_region(g)))) == pytest.approx(S2_L3[h], abs=1e-9)


def test_renyi_product_state_and_bell_pair():
    v = np.zeros(16)
    v[0] = 1
    assert renyi2_exact(v, 4, [0, 1]) == pytest.approx(0.0, abs=1e-15)
    # (|00> + |11>)/sqrt2 on edges 0, 2
    v = np.zeros(16)
    v[0] = v[0b0101] = 2**-0.5
    assert renyi2_exact(v, 4, [0]) == pytest.approx(np.log(2))
    assert renyi2_exact(v, 4, [0, 2]) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(InvalidArgument):
        renyi2_exact(v, 4, [0, 1, 2, 3])


def test_cache(tmp_path):
    g = build_lattice(2)
    a = exact_ground_state(g, (0.2, 0, 0.2), cache_dir=tmp_path)
    assert len(list(tmp_path.glob("*.npz"))) == 1
    b = exact_ground_state(g, (0.2, 0, 0.2), cache_dir=tmp_path)
    assert b.energy == a.energy
    assert np.array_equal(a.vector, b.vector)


def test_capacity_limits():
    with pytest.raises(CapacityError):
        exact_ground_state(build_lattice(4), (0.2, 0, 0.2), method="dense")
    with pytest.raises(CapacityError):
        exact_ground_state(build_lattice(5), (0.2, 0, 0.2))
    with pytest.raises(InvalidArgument):
        exact_ground_state(build_lattice(2), (0.2, 0, 0.2), method="qr")


def test_toric_code_point():
    # h = 0: E0 = -(number of stabilizers), ground state has O_Z closed loop 1
    g = build_lattice(3)
    st_ = exact_ground_state(g, (0, 0, 0))
    assert st_.energy == pytest.approx(-g.n_stabilizers, abs=1e-10)
