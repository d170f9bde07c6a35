"""Metropolis-Hastings sampling of ``|psi_s|^2`` over many parallel chains.

Proposals: with probability ``n_interior / N`` flip the four edges of a
uniformly chosen interior vertex, otherwise flip one uniformly chosen edge.
Both moves are involutions with uniform selection, so the proposal is
symmetric and the acceptance probability is ``min(1, |psi(s')/psi(s)|^2)``.

Each chain owns a Philox stream spawned from ``SeedSequence([seed, iteration])``
so a batch is a deterministic function of the seed, the iteration counter and
the wavefunction.
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .stats import integrated_time, split_rhat


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 1024
    n_burn_in: int = 8
    n_subsample: int = 480
    samples_per_chain: int = 8
    seed: int = 0

    def __post_init__(self):
        for name in ("n_chains", "n_subsample", "samples_per_chain"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgument(f"{name} must be positive")
        if self.n_burn_in < 0:
            raise InvalidArgument("n_burn_in must be non-negative")

    @property
    def n_samples(self):
        return self.n_chains * self.samples_per_chain


@dataclass
class SampleBatch:
    """Retained samples, chain-major: rows ``c * samples_per_chain + t``."""

    configs: np.ndarray
    log_psi: np.ndarray
    acceptance: np.ndarray
    n_chains: int
    samples_per_chain: int
    numerical_events: int = 0
    weights: np.ndarray = None

    @property
    def size(self):
        return self.configs.shape[0]

    @property
    def chain_ids(self):
        return np.repeat(np.arange(self.n_chains), self.samples_per_chain)

    @property
    def mean_acceptance(self):
        return float(np.mean(self.acceptance))

    def chain_series(self, values):
        return np.asarray(values).reshape(self.n_chains, self.samples_per_chain)


@dataclass
class ChainDiagnostics:
    tau: float
    rhat: float
    acceptance: float
    degenerate: bool = False


def exhaustive_batch(log_psi, geom):
    """All ``2**N`` configurations weighted by normalized ``|psi|^2``."""
    from .ed import all_configurations

    S = all_configurations(geom)
    lp = np.asarray(log_psi(S))
    logw = 2.0 * np.real(lp)
    w = np.exp(logw - np.max(logw))
    w /= w.sum()
    return SampleBatch(S, lp, np.ones(1), 1, S.shape[0], 0, w)


def propose(geom, s, rng):
    """Return ``(s', kind)`` with kind ``'vertex'`` or ``'spin'``."""
    n_int = len(geom.interior_vertices)
    s = np.asarray(s)
    if n_int and rng.random() < n_int / geom.n_edges:
        v = geom.interior_vertices[rng.integers(n_int)]
        return s * geom.vertex_flip_signs[v], "vertex"
    out = s.copy()
    out[rng.integers(geom.n_edges)] *= -1
    return out, "spin"


def metropolis_step(log_psi, geom, s, rng, events=None):
    """One proposal plus accept/reject. ``log_psi`` maps a single configuration."""
    lp = complex(log_psi(s))
    if not np.isfinite(lp):
        raise InvalidArgument("metropolis_step requires a finite log-amplitude at s")
    candidate, _ = propose(geom, s, rng)
    lq = complex(log_psi(candidate))
    if np.isnan(lq) or lq.real == np.inf:
        if events is not None:
            events["non_finite"] += 1
        return s, False
    u = rng.random()
    if np.log(u) < 2.0 * (lq.real - lp.real):
        return candidate, True
    return s, False


def _chain_generators(seed, iteration, n_chains):
    ss = np.random.SeedSequence([int(seed), int(iteration)])
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(n_chains)]


def run_chains(log_psi, geom, config, iteration=0):
    """Advance ``config.n_chains`` chains in lock-step; ``log_psi`` is batched."""
    C, N = config.n_chains, geom.n_edges
    gens = _chain_generators(config.seed, iteration, C)
    S = np.stack([1 - 2 * g.integers(0, 2, N) for g in gens]).astype(np.int8)
    lp = np.asarray(log_psi(S))
    if not np.all(np.isfinite(lp)):
        raise InvalidArgument("initial configurations have non-finite log-amplitudes")
    interior = np.asarray(geom.interior_vertices)
    p_vertex = len(interior) / N
    flips = np.asarray(geom.vertex_flip_signs)[interior] if len(interior) else None
    rows = np.arange(C)

    n_blocks = config.n_burn_in + config.samples_per_chain
    K = config.n_subsample
    configs = np.empty((C, config.samples_per_chain, N), dtype=np.int8)
    series = np.empty((C, config.samples_per_chain), dtype=lp.dtype)
    accepted = np.zeros(C)
    events = Counter()
    for block in range(n_blocks):
        u = np.stack([g.random((K, 3)) for g in gens], axis=1)
        for k in range(K):
            uk = u[k]
            proposal = S.copy()
            is_vertex = uk[:, 0] < p_vertex
            if flips is not None and is_vertex.any():
                vsel = np.minimum((uk[is_vertex, 1] * len(interior)).astype(np.int64), len(interior) - 1)
                proposal[is_vertex] *= flips[vsel]
            spin = ~is_vertex
            esel = np.minimum((uk[spin, 1] * N).astype(np.int64), N - 1)
            proposal[rows[spin], esel] *= -1
            lq = np.asarray(log_psi(proposal))
            bad = np.isnan(lq) | (np.real(lq) == np.inf)
            if bad.any():
                events["non_finite"] += int(bad.sum())
            with np.errstate(divide="ignore", invalid="ignore"):
                accept = (np.log(uk[:, 2]) < 2.0 * (np.real(lq) - np.real(lp))) & ~bad
            S[accept] = proposal[accept]
            lp = np.where(accept, lq, lp)
            if block >= config.n_burn_in:
                accepted += accept
        if block >= config.n_burn_in:
            t = block - config.n_burn_in
            configs[:, t] = S
            series[:, t] = lp
    acceptance = accepted / (config.samples_per_chain * K)
    return SampleBatch(
        configs.reshape(-1, N), series.reshape(-1), acceptance, C,
        config.samples_per_chain, events["non_finite"],
    )


def diagnostics(batch, local_energy_series):
    """Autocorrelation time and split-R-hat of the (real) local-energy series."""
    if batch.n_chains < 2 or batch.samples_per_chain < 4:
        raise InvalidArgument("diagnostics need >= 2 chains with >= 4 samples each")
    x = np.real(batch.chain_series(local_energy_series))
    tau, degenerate = integrated_time(x)
    rhat = 1.0 if degenerate else split_rhat(x)
    return ChainDiagnostics(tau, rhat, batch.mean_acceptance, degenerate)
