import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import kron_ground_state, kron_hamiltonian, random_configs
from toricnqs import FieldParameters, InvalidArgument, NumericalDomainError, build_lattice
from toricnqs.ed import all_configurations, configs_to_index, log_psi_from_vector
from toricnqs.hamiltonian import ConnectedBatch, connected_configurations, local_energies, local_energy


def assembled(geom, h):
    """Dense H from connected elements: column s holds <s'|H|s>."""
    S = all_configurations(geom)
    H = np.zeros((len(S), len(S)), dtype=complex)
    for j, s in enumerate(S):
        for el in connected_configurations(geom, h, s):
            sp = s.copy()
            sp[list(el.flips)] *= -1
            H[configs_to_index(sp), j] += el.amplitude
    return H


def test_single_flip_elements():
    g = build_lattice(2)
    els = connected_configurations(g, (0, 0.3, 0), np.ones(4, dtype=np.int8))
    singles = [e for e in els if len(e.flips) == 1]
    assert len(singles) == 4
    assert all(e.amplitude == pytest.approx(-0.3j) for e in singles)


@pytest.mark.parametrize("L", [2, 3])
@pytest.mark.parametrize("h", [(0.2, 0.0, 0.2), (0.0, 0.3, 0.0), (0.13, -0.27, 0.41)])
def test_matches_kronecker_oracle(L, h):
    H = assembled(build_lattice(L), h)
    np.testing.assert_allclose(H, kron_hamiltonian(L, *h).toarray(), atol=1e-13)
    assert np.array_equal(H, H.conj().T)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_hermitian(hx, hy, hz):
    H = assembled(build_lattice(2), (hx, hy, hz))
    assert np.array_equal(H, H.conj().T)
    if hy == 0:
        assert np.all(H.imag == 0)


@pytest.mark.parametrize("h", [(0.2, 0.0, 0.2), (0.2, 0.3, 0.2)])
@pytest.mark.parametrize("L", [2, 3])
def test_local_energy_constant_on_ground_state(L, h):
    E0, v = kron_ground_state(L, *h)
    g = build_lattice(L)
    S = all_configurations(g)
    keep = np.abs(v) > 1e-6
    el = local_energies(g, h, log_psi_from_vector(v), S[keep])
    np.testing.assert_allclose(el, E0, atol=1e-9)


def test_batched_matches_single(rng):
    g = build_lattice(3)
    h = FieldParameters(0.3, 0.2, -0.1)
    table = rng.standard_normal(1 << g.n_edges) + 1j * rng.standard_normal(1 << g.n_edges)
    fn = lambda S: table[configs_to_index(S)]  # noqa: E731
    S = random_configs(rng, 20, g.n_edges)
    batched = local_energies(g, h, fn, S, connected=ConnectedBatch(g, h))
    single = [local_energy(g, h, fn, s) for s in S]
    np.testing.assert_allclose(batched, single, rtol=1e-13)


def test_local_energy_is_h_psi_over_psi(rng):
    g = build_lattice(2)
    h = (0.3, 0.25, 0.1)
    psi = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    el = local_energies(g, h, log_psi_from_vector(psi), all_configurations(g))
    np.testing.assert_allclose(el, kron_hamiltonian(2, *h).toarray() @ psi / psi, rtol=1e-12)


def test_invalid_configuration():
    g = build_lattice(2)
    with pytest.raises(InvalidArgument):
        connected_configurations(g, (0, 0, 0), np.ones(5))
    with pytest.raises(InvalidArgument):
        connected_configurations(g, (0, 0, 0), np.array([1, 0, 1, 1]))
    with pytest.raises(InvalidArgument):
        FieldParameters(np.nan, 0, 0)


def test_nonfinite_amplitude():
    g = build_lattice(2)
    psi = np.ones(16)
    psi[0] = np.nan
    with pytest.raises(NumericalDomainError):
        local_energies(g, (0.2, 0, 0.2), log_psi_from_vector(psi), all_configurations(g))
