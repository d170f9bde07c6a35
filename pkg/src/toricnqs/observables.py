"""Monte Carlo estimators over a sample batch.

Every estimator accepts either a Metropolis batch (uniform weights, error bars
from the chain-aware autocorrelation time) or an exhaustive batch (all
configurations weighted by exact ``|psi|^2``, zero statistical error).
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, InvalidArgument, UndefinedEntropyError, UndefinedRatioError
from .hamiltonian import local_energies
from .lattice import string_support
from .stats import mean_and_error

PAULIS = ("X", "Y", "Z")
MAX_EXHAUSTIVE_PAIRS = 1 << 22


@dataclass
class ObservableEstimate:
    mean: complex
    stderr: float
    tau: float
    n_samples: int
    raw: complex = None

    @property
    def real(self):
        return float(np.real(self.mean))


@dataclass(frozen=True)
class Region:
    edges: tuple

    def __post_init__(self):
        edges = tuple(sorted({int(e) for e in self.edges}))
        if not edges:
            raise InvalidArgument("region must contain at least one edge")
        object.__setattr__(self, "edges", edges)

    def validate(self, geom):
        if self.edges[0] < 0 or self.edges[-1] >= geom.n_edges:
            raise InvalidArgument(f"region edges out of range for L={geom.L}")
        if len(self.edges) >= geom.n_edges:
            raise InvalidArgument("region must be a proper subset of the edges")


@dataclass(frozen=True)
class BFFMSpec:
    perimeter: int
    kind: str = "primal"


@dataclass
class RatioEstimate:
    value: float
    stderr: float
    numerator: ObservableEstimate
    denominator: ObservableEstimate


@dataclass
class RenyiEstimate:
    value: float
    stderr: float
    swap: float
    swap_stderr: float
    n_pairs: int


def _estimate(values, batch, hermitian=True):
    mean, se, tau = mean_and_error(values, batch.n_chains, batch.weights)
    raw = complex(mean)
    if hermitian and abs(raw.imag) <= 3.0 * se + 1e-12 * max(1.0, abs(raw)):
        mean = raw.real
    return ObservableEstimate(mean, float(se), float(tau), int(batch.size), raw)


def _batch_log_psi(log_psi, batch):
    if batch.log_psi is not None and len(batch.log_psi) == batch.size:
        return np.asarray(batch.log_psi)
    return np.asarray(log_psi(batch.configs))


def energy_density(E, geom):
    """Energy per stabilizer, ``Re(E) / (N + 1)``."""
    return float(np.real(E)) / (geom.n_edges + 1)


def energy(log_psi, geom, h, batch, connected=None):
    """Variational energy from local energies; returns ``(estimate, E_loc)``."""
    lp = _batch_log_psi(log_psi, batch)
    eloc = local_energies(geom, h, log_psi, batch.configs, lp, connected)
    return _estimate(eloc, batch), eloc


def _validate_string(geom, string):
    if len(string) == 0:
        raise InvalidArgument("Pauli string is empty")
    edges = []
    for edge, op in string:
        if op not in PAULIS:
            raise InvalidArgument(f"unknown Pauli operator {op!r}")
        if not 0 <= int(edge) < geom.n_edges:
            raise InvalidArgument(f"edge {edge} out of range for L={geom.L}")
        edges.append(int(edge))
    if len(set(edges)) != len(edges):
        raise InvalidArgument("Pauli string repeats an edge")


def pauli_string_values(log_psi, geom, string, S, lp):
    """Per-sample ``(P psi)(s) / psi(s)``.

    ``Z_j`` contributes ``s_j``; ``X_j`` flips edge ``j``; ``Y_j`` flips edge
    ``j`` with phase ``<s|Y_j|s'> = -i s_j``.
    """
    _validate_string(geom, string)
    S = np.asarray(S)
    phase = np.ones(S.shape[0], dtype=np.complex128)
    flip = np.ones(geom.n_edges, dtype=np.int8)
    for edge, op in string:
        e = int(edge)
        if op == "Z":
            phase *= S[:, e]
        elif op == "Y":
            phase *= -1j * S[:, e]
            flip[e] = -1
        else:
            flip[e] = -1
    if np.all(flip == 1):
        return phase
    lq = np.asarray(log_psi(S * flip))
    return phase * np.exp(lq - lp)


def pauli_string_expectation(log_psi, geom, string, batch):
    lp = _batch_log_psi(log_psi, batch)
    return _estimate(pauli_string_values(log_psi, geom, string, batch.configs, lp), batch)


def bffm(log_psi, geom, perimeter, kind, batch):
    """``<prod_{C~}> / sqrt(|<prod_C>|)`` with Z strings (primal) or X strings (dual).

    Numerator and denominator come from the same batch; the first-order error
    is propagated in quadrature.
    """
    sup = string_support(geom, perimeter, kind)
    op = "Z" if kind == "primal" else "X"
    lp = _batch_log_psi(log_psi, batch)
    num = _estimate(pauli_string_values(log_psi, geom, [(e, op) for e in sup.half], batch.configs, lp), batch)
    den = _estimate(pauli_string_values(log_psi, geom, [(e, op) for e in sup.loop], batch.configs, lp), batch)
    n, d = float(np.real(num.mean)), float(np.real(den.mean))
    if abs(d) <= 3.0 * den.stderr or abs(d) < 1e-14:
        raise UndefinedRatioError(
            f"closed-loop expectation {d:.3g} +- {den.stderr:.2g} is consistent with zero", num, den
        )
    root = np.sqrt(abs(d))
    value = n / root
    err = np.hypot(num.stderr / root, 0.5 * abs(n) * den.stderr / abs(d) ** 1.5)
    return RatioEstimate(float(value), float(err), num, den)


def _swap_configs(S1, S2, edges):
    A = np.zeros(S1.shape[1], dtype=bool)
    A[list(edges)] = True
    return np.where(A, S2, S1), np.where(A, S1, S2)


def renyi2_swap(log_psi, geom, region, batch1, batch2):
    """Renyi-2 entropy of ``region`` from the SWAP estimator on two replicas.

    Replica samples are paired by index. The error comes from a jackknife over
    chains (or over 20 blocks of pairs for single-chain batches).
    """
    if not isinstance(region, Region):
        region = Region(tuple(region))
    region.validate(geom)
    lp1, lp2 = _batch_log_psi(log_psi, batch1), _batch_log_psi(log_psi, batch2)
    if batch1.weights is not None or batch2.weights is not None:
        return _renyi2_exhaustive(log_psi, region, batch1, batch2, lp1, lp2)
    if batch1.size != batch2.size:
        raise InvalidArgument("replica batches must have equal sizes")
    T1, T2 = _swap_configs(batch1.configs, batch2.configs, region.edges)
    vals = np.real(np.exp(np.asarray(log_psi(T1)) + np.asarray(log_psi(T2)) - lp1 - lp2))
    n = vals.size
    blocks = batch1.n_chains if batch1.n_chains >= 2 else min(20, n)
    groups = np.array_split(vals, blocks)
    sums = np.array([g.sum() for g in groups])
    counts = np.array([g.size for g in groups])
    mean = vals.mean()
    loo = (sums.sum() - sums) / (n - counts)
    k = len(groups)
    swap_se = float(np.sqrt((k - 1) / k * np.sum((loo - loo.mean()) ** 2)))
    if mean <= 3.0 * swap_se or mean <= 0:
        raise UndefinedEntropyError(f"SWAP estimate {mean:.3g} +- {swap_se:.2g} is not positive", mean)
    s2_loo = -np.log(np.clip(loo, 1e-300, None))
    s2_se = float(np.sqrt((k - 1) / k * np.sum((s2_loo - s2_loo.mean()) ** 2)))
    return RenyiEstimate(float(-np.log(mean)), s2_se, float(mean), swap_se, n)


def _renyi2_exhaustive(log_psi, region, batch1, batch2, lp1, lp2):
    n1, n2 = batch1.size, batch2.size
    if n1 * n2 > MAX_EXHAUSTIVE_PAIRS:
        raise CapacityError(f"exhaustive SWAP needs {n1 * n2} pairs (limit {MAX_EXHAUSTIVE_PAIRS})")
    w1 = batch1.weights if batch1.weights is not None else np.full(n1, 1.0 / n1)
    w2 = batch2.weights if batch2.weights is not None else np.full(n2, 1.0 / n2)
    i, j = np.divmod(np.arange(n1 * n2), n2)
    T1, T2 = _swap_configs(batch1.configs[i], batch2.configs[j], region.edges)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.exp(np.asarray(log_psi(T1)) + np.asarray(log_psi(T2)) - lp1[i] - lp2[j])
    vals = np.where((w1[i] * w2[j]) > 0, vals, 0.0)
    mean = float(np.real(np.sum(w1[i] * w2[j] * vals)))
    if mean <= 0:
        raise UndefinedEntropyError(f"SWAP estimate {mean:.3g} is not positive", mean)
    return RenyiEstimate(-np.log(mean), 0.0, mean, 0.0, n1 * n2)


def invariance_values(log_psi, geom, S, lp):
    """Per-sample mean over vertices of ``|log psi(A_v s) - log psi(s)|``."""
    S = np.asarray(S)
    B, nv = S.shape[0], geom.n_vertices
    flipped = S[:, None, :] * np.asarray(geom.vertex_flip_signs)[None, :, :]
    lq = np.asarray(log_psi(flipped.reshape(B * nv, -1))).reshape(B, nv)
    return np.abs(lq - np.asarray(lp)[:, None]).mean(axis=1)


def invariance_error(log_psi, geom, batch):
    lp = _batch_log_psi(log_psi, batch)
    return _estimate(invariance_values(log_psi, geom, batch.configs, lp), batch)
