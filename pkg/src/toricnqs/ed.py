"""Exact diagonalization oracle for small lattices.

Basis states are integers ``b`` in ``[0, 2**N)``; bit ``i`` set means
``s_i = -1``. Matrix elements come from the same connected-configuration rule
as the Monte Carlo local energy, assembled by the kernels in
:mod:`toricnqs.kernels`.
"""

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from . import kernels
from .errors import CapacityError, InvalidArgument
from .hamiltonian import FieldParameters

DENSE_MAX_EDGES = 14
ITERATIVE_MAX_EDGES = 24


def memory_budget():
    return float(os.environ.get("TORICNQS_ED_MEMORY", 2.5e9))


def configs_to_index(S):
    S = np.asarray(S)
    bits = (S < 0).astype(np.int64)
    return bits @ (np.int64(1) << np.arange(S.shape[-1], dtype=np.int64))


def index_to_configs(idx, n_edges):
    idx = np.asarray(idx, dtype=np.int64)
    return (1 - 2 * ((idx[..., None] >> np.arange(n_edges)) & 1)).astype(np.int8)


def all_configurations(geom):
    return index_to_configs(np.arange(1 << geom.n_edges), geom.n_edges)


def _masks(index_lists):
    return np.array([sum(1 << int(e) for e in edges) for edges in index_lists], dtype=np.int64)


class HamiltonianOperator:
    """Matrix-free and assembled forms of H for one geometry and field."""

    def __init__(self, geom, h):
        self.geom = geom
        self.h = FieldParameters.coerce(h)
        self.n_bits = geom.n_edges
        self.dim = 1 << self.n_bits
        self.vertex_masks = _masks(geom.vertex_edges)
        self.plaquette_masks = _masks(geom.plaquette_edges)
        self.diag = kernels.hamiltonian_diagonal(self.n_bits, self.plaquette_masks, self.h.hz)
        self.dtype = np.complex128 if self.h.hy != 0.0 else np.float64

    def matvec(self, x):
        return kernels.hamiltonian_matvec(
            x, self.diag, self.vertex_masks, self.n_bits, self.h.hx, self.h.hy
        )

    def sparse(self):
        rows, cols, vals = kernels.hamiltonian_coo(
            self.diag, self.vertex_masks, self.n_bits, self.h.hx, self.h.hy
        )
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim))

    def dense(self):
        itemsize = np.dtype(self.dtype).itemsize
        if self.n_bits > DENSE_MAX_EDGES or self.dim**2 * itemsize > memory_budget():
            raise CapacityError(
                f"dense H for N={self.n_bits} needs {self.dim**2 * itemsize / 1e9:.1f} GB; "
                f"dense path is limited to N <= {DENSE_MAX_EDGES} within the memory budget"
            )
        return self.sparse().toarray()


@dataclass
class ExactState:
    energy: float
    vector: np.ndarray
    L: int
    h: FieldParameters
    method: str
    residual: float

    @property
    def probabilities(self):
        return np.abs(self.vector) ** 2


def _fix_phase(v):
    k = np.argmax(np.abs(v))
    phase = v[k] / abs(v[k])
    v = v / phase
    if np.isrealobj(v) or np.max(np.abs(v.imag)) == 0.0:
        v = np.real(v).copy()
    return v


def lanczos_ground_state(matvec, dim, dtype, tol=1e-11, max_cycles=200, seed=0):
    """Restarted Lanczos with full reorthogonalization inside each cycle.

    Each cycle builds a Krylov basis of at most ``m`` vectors (limited by the
    memory budget) from the current Ritz vector and restarts from the new one.
    Returns ``(energy, vector, residual_norm)``.
    """
    itemsize = np.dtype(dtype).itemsize
    m = int(min(80, dim, memory_budget() // (dim * itemsize) - 3))
    if m < 8:
        raise CapacityError(
            f"Lanczos for dim={dim} needs at least {8 * dim * itemsize / 1e9:.1f} GB; "
            f"limit is N <= {ITERATIVE_MAX_EDGES} within the memory budget"
        )
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    if np.dtype(dtype).kind == "c":
        v = v + 1j * rng.standard_normal(dim)
    v = v.astype(dtype)
    v /= np.linalg.norm(v)
    V = np.empty((m, dim), dtype=dtype)
    energy, resid = np.nan, np.inf
    for _ in range(max_cycles):
        alphas, betas = [], []
        V[0] = v
        k = 0
        for k in range(m):
            w = matvec(V[k])
            a = np.vdot(V[k], w).real
            alphas.append(a)
            w = w - V[: k + 1].T @ (V[: k + 1].conj() @ w)
            w = w - V[: k + 1].T @ (V[: k + 1].conj() @ w)
            b = np.linalg.norm(w)
            if k == m - 1 or b < 1e-14:
                break
            betas.append(b)
            V[k + 1] = w / b
        n = len(alphas)
        T = np.diag(alphas) + np.diag(betas[: n - 1], 1) + np.diag(betas[: n - 1], -1)
        evals, evecs = np.linalg.eigh(T)
        v = evecs[:, 0].astype(dtype) @ V[:n]
        v /= np.linalg.norm(v)
        Hv = matvec(v)
        energy = np.vdot(v, Hv).real
        resid = np.linalg.norm(Hv - energy * v)
        if resid < tol * max(1.0, abs(energy)):
            break
    return energy, v, resid


AUTO_DENSE_MAX_EDGES = 8


def exact_ground_state(geom, h, method="auto", cache_dir=None):
    """Ground state by dense diagonalization or restarted Lanczos.

    ``method="auto"`` uses the dense solver for ``N <= 8`` and Lanczos above.
    """
    h = FieldParameters.coerce(h)
    if method == "auto":
        method = "dense" if geom.n_edges <= AUTO_DENSE_MAX_EDGES else "iterative"
    if method not in ("dense", "iterative"):
        raise InvalidArgument(f"method must be 'auto', 'dense' or 'iterative', got {method!r}")
    limit = DENSE_MAX_EDGES if method == "dense" else ITERATIVE_MAX_EDGES
    if geom.n_edges > limit:
        raise CapacityError(f"{method} ED is limited to N <= {limit}; L={geom.L} has N={geom.n_edges}")
    path = _cache_path(cache_dir, geom, h, method)
    if path is not None and os.path.exists(path):
        with np.load(path) as data:
            return ExactState(
                float(data["energy"]), data["vector"], geom.L, h, method, float(data["residual"])
            )
    op = HamiltonianOperator(geom, h)
    if method == "dense":
        H = op.dense()
        evals, evecs = scipy.linalg.eigh(H, subset_by_index=[0, 0])
        energy, vec = float(evals[0]), evecs[:, 0]
    else:
        energy, vec, _ = lanczos_ground_state(op.matvec, op.dim, op.dtype)
    vec = _fix_phase(vec / np.linalg.norm(vec))
    residual = float(np.linalg.norm(op.matvec(vec) - energy * vec))
    state = ExactState(float(energy), vec, geom.L, h, method, residual)
    if path is not None:
        os.makedirs(cache_dir, exist_ok=True)
        np.savez(path, energy=state.energy, vector=vec, residual=residual)
        with open(path[:-4] + ".json", "w") as fh:
            json.dump({"L": geom.L, "h": h.as_tuple(), "method": method, "energy": energy,
                       "residual": residual}, fh)
    return state


def _cache_path(cache_dir, geom, h, method):
    if cache_dir is None:
        return None
    key = json.dumps([geom.L, h.as_tuple(), method])
    digest = hashlib.sha1(key.encode()).hexdigest()[:12]
    return os.path.join(cache_dir, f"ed_L{geom.L}_{method}_{digest}.npz")


# ------------------------------------------------------------------ observables


def apply_pauli_string(vector, n_edges, string):
    """Return ``P |psi>`` for ``P = prod_j sigma_j`` given as ``[(edge, 'X'|'Y'|'Z'), ...]``."""
    idx = np.arange(vector.size, dtype=np.int64)
    phase = np.ones(vector.size, dtype=np.complex128)
    mask = 0
    for edge, op in string:
        s = 1 - 2 * ((idx >> int(edge)) & 1)
        if op == "Z":
            phase *= s
        elif op == "Y":
            phase *= 1j * s
            mask |= 1 << int(edge)
        elif op == "X":
            mask |= 1 << int(edge)
        else:
            raise InvalidArgument(f"unknown Pauli {op!r}")
    out = np.empty(vector.size, dtype=np.complex128)
    out[idx ^ mask] = phase * vector
    return out


def pauli_expectation(state, string):
    _validate_string(state, string)
    n = int(np.log2(state.vector.size))
    return complex(np.vdot(state.vector, apply_pauli_string(state.vector, n, string)))


def _validate_string(state, string):
    n = int(np.log2(state.vector.size))
    edges = [int(e) for e, _ in string]
    if not edges:
        raise InvalidArgument("Pauli string is empty")
    if len(set(edges)) != len(edges) or min(edges) < 0 or max(edges) >= n:
        raise InvalidArgument(f"invalid or repeated edges in Pauli string {string!r}")


def renyi2_exact(vector, n_edges, region):
    region = np.unique(np.asarray(region, dtype=np.int64))
    if region.size == 0 or region.size >= n_edges:
        raise InvalidArgument("region must be a non-empty proper subset of the edges")
    rest = np.setdiff1d(np.arange(n_edges), region)
    # bit i of the basis index is axis (n_edges - 1 - i) of the reshaped tensor
    psi = vector.reshape((2,) * n_edges)
    axes = [n_edges - 1 - i for i in region] + [n_edges - 1 - i for i in rest]
    M = psi.transpose(axes).reshape(1 << region.size, -1)
    rho = M @ M.conj().T
    return float(-np.log(np.real(np.sum(rho * rho.conj()))))


def exact_expectation(state, observable):
    """Exact value of a Pauli string, a BFFM ratio or a Renyi-2 entropy."""
    from .lattice import build_lattice, string_support
    from .observables import BFFMSpec, Region

    n = int(np.log2(state.vector.size))
    if isinstance(observable, Region):
        return renyi2_exact(state.vector, n, observable.edges)
    if isinstance(observable, BFFMSpec):
        geom = build_lattice(state.L)
        sup = string_support(geom, observable.perimeter, observable.kind)
        op = "Z" if observable.kind == "primal" else "X"
        num = pauli_expectation(state, [(e, op) for e in sup.half]).real
        den = pauli_expectation(state, [(e, op) for e in sup.loop]).real
        return num / np.sqrt(abs(den))
    return pauli_expectation(state, list(observable))


def log_psi_from_vector(vector):
    """Batched log-amplitude function backed by an explicit state vector."""
    vector = np.asarray(vector)
    with np.errstate(divide="ignore"):
        table = np.log(vector.astype(np.complex128))
    if np.isrealobj(vector) and np.all(vector >= 0):
        table = table.real

    def log_psi(S):
        return table[configs_to_index(S)]

    return log_psi
