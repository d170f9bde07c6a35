import os
from functools import lru_cache

import numpy as np
import pytest
import scipy.sparse
import scipy.sparse.linalg

from toricnqs.lattice import build_lattice

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
PAULI = {"X": X, "Y": Y, "Z": Z}


def edge_tables(L):
    """Edge numbering written out independently of the package."""
    h, v, n = {}, {}, 0
    for r in range(L):
        for c in range(L - 1):
            h[r, c] = n
            n += 1
    for r in range(L - 1):
        for c in range(L):
            v[r, c] = n
            n += 1
    return h, v, n


def kron_op(n, factors):
    """Sparse operator with ``factors[i]`` on qubit ``i``; qubit i is bit i of the index."""
    m = scipy.sparse.identity(1, dtype=complex, format="csr")
    for i in reversed(range(n)):
        m = scipy.sparse.kron(m, scipy.sparse.csr_matrix(factors.get(i, np.eye(2))), format="csr")
    return m


@lru_cache(maxsize=None)
def kron_hamiltonian(L, hx, hy, hz):
    h, v, n = edge_tables(L)
    H = scipy.sparse.csr_matrix((2**n, 2**n), dtype=complex)
    for r in range(L):
        for c in range(L):
            star = [h.get((r, c)), h.get((r, c - 1)), v.get((r, c)), v.get((r - 1, c))]
            H = H - kron_op(n, {e: X for e in star if e is not None})
    for r in range(L - 1):
        for c in range(L - 1):
            H = H - kron_op(n, {e: Z for e in (h[r, c], h[r + 1, c], v[r, c], v[r, c + 1])})
    for i in range(n):
        H = H - (hx * kron_op(n, {i: X}) + hy * kron_op(n, {i: Y}) + hz * kron_op(n, {i: Z}))
    return H.tocsr()


@lru_cache(maxsize=None)
def kron_ground_state(L, hx, hy, hz):
    """ARPACK ground state of the Kronecker-product Hamiltonian (dense below 64 states)."""
    H = kron_hamiltonian(L, hx, hy, hz)
    if H.shape[0] <= 64:
        w, V = np.linalg.eigh(H.toarray())
        return w[0], V[:, 0]
    w, V = scipy.sparse.linalg.eigsh(H, k=1, which="SA", tol=1e-14, v0=np.ones(H.shape[0], dtype=complex))
    return w[0], V[:, 0]


def random_configs(rng, n, n_edges):
    return rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, n_edges))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=[2, 3])
def geom(request):
    return build_lattice(request.param)


def pytest_report_header(config):
    return f"TORICNQS_NUMBA={os.environ.get('TORICNQS_NUMBA', '1')}"


ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record and assert one acceptance criterion."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
