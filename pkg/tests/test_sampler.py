import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import kron_ground_state
from toricnqs import InvalidArgument, build_lattice
from toricnqs.ed import configs_to_index, log_psi_from_vector
from toricnqs.sampler import (
    SamplerConfig,
    diagnostics,
    exhaustive_batch,
    metropolis_step,
    propose,
    run_chains,
)
from toricnqs.stats import integrated_time, mean_and_error, split_rhat


def ar1(rng, rho, shape):
    x = np.empty(shape)
    x[..., 0] = rng.standard_normal(shape[:-1])
    noise = rng.standard_normal(shape) * np.sqrt(1 - rho**2)
    for t in range(1, shape[-1]):
        x[..., t] = rho * x[..., t - 1] + noise[..., t]
    return x


def ground_state_fn(L, h):
    return log_psi_from_vector(kron_ground_state(L, *h)[1])


def test_config_validation():
    for bad in (dict(n_chains=0), dict(n_subsample=0), dict(samples_per_chain=0), dict(n_burn_in=-1)):
        with pytest.raises(InvalidArgument):
            SamplerConfig(**bad)
    assert SamplerConfig().n_samples == 8192


def test_deterministic_and_seeded():
    g = build_lattice(2)
    fn = ground_state_fn(2, (0.2, 0.0, 0.2))
    cfg = SamplerConfig(n_chains=8, n_burn_in=2, n_subsample=3, samples_per_chain=5, seed=11)
    a = run_chains(fn, g, cfg, iteration=4)
    b = run_chains(fn, g, cfg, iteration=4)
    assert np.array_equal(a.configs, b.configs)
    assert np.array_equal(a.acceptance, b.acceptance)
    assert not np.array_equal(a.configs, run_chains(fn, g, cfg, iteration=5).configs)
    from dataclasses import replace
    assert not np.array_equal(a.configs, run_chains(fn, g, replace(cfg, seed=12), 4).configs)


def test_chains_have_independent_streams():
    # chain c depends only on (seed, iteration, c), not on how many chains run
    g = build_lattice(3)
    fn = lambda S: np.zeros(len(S))  # noqa: E731
    small = run_chains(fn, g, SamplerConfig(n_chains=3, n_burn_in=1, n_subsample=4, samples_per_chain=2))
    large = run_chains(fn, g, SamplerConfig(n_chains=7, n_burn_in=1, n_subsample=4, samples_per_chain=2))
    assert np.array_equal(small.configs, large.configs[: small.size])


def test_batch_layout():
    g = build_lattice(3)
    fn = lambda S: np.zeros(len(S))  # noqa: E731
    b = run_chains(fn, g, SamplerConfig(n_chains=4, n_burn_in=0, n_subsample=2, samples_per_chain=3))
    assert b.configs.shape == (12, g.n_edges) and b.log_psi.shape == (12,)
    assert np.array_equal(b.chain_ids, np.repeat(np.arange(4), 3))
    assert b.chain_series(np.arange(12)).shape == (4, 3)
    assert b.mean_acceptance == 1.0


def test_stationary_distribution_l2():
    g = build_lattice(2)
    E0, v = kron_ground_state(2, 0.2, 0.0, 0.2)
    cfg = SamplerConfig(n_chains=1000, n_burn_in=4, n_subsample=8, samples_per_chain=100, seed=3)
    b = run_chains(log_psi_from_vector(v), g, cfg)
    emp = np.bincount(configs_to_index(b.configs), minlength=16) / b.size
    assert 0.5 * np.abs(emp - np.abs(v) ** 2).sum() < 0.015


def test_stationary_distribution_l3_marginals():
    # L=3 has interior-vertex moves; single-edge marginals match the exact state
    g = build_lattice(3)
    _, v = kron_ground_state(3, 0.2, 0.0, 0.2)
    p = np.abs(v) ** 2
    from toricnqs.ed import all_configurations
    S = all_configurations(g)
    exact_mag = p @ S
    cfg = SamplerConfig(n_chains=500, n_burn_in=4, n_subsample=24, samples_per_chain=40, seed=5)
    b = run_chains(log_psi_from_vector(v), g, cfg)
    for e in range(g.n_edges):
        m, se, _ = mean_and_error(b.configs[:, e].astype(float), n_chains=b.n_chains)
        assert abs(m - exact_mag[e]) < 4 * se


def test_zero_amplitude_never_visited():
    g = build_lattice(2)
    psi = np.ones(16)
    psi[[3, 9]] = 0.0
    cfg = SamplerConfig(n_chains=64, n_burn_in=2, n_subsample=4, samples_per_chain=20)
    fn = log_psi_from_vector(psi)
    with pytest.raises(InvalidArgument):
        run_chains(fn, g, cfg)  # some chain starts on a zero amplitude
    psi[[3, 9]] = 1e-300
    b = run_chains(log_psi_from_vector(psi), g, cfg)
    idx = configs_to_index(b.configs)
    assert not np.isin(idx, [3, 9]).any()


def test_propose_and_step(rng):
    g = build_lattice(3)
    s = np.ones(g.n_edges, dtype=np.int8)
    kinds = set()
    for _ in range(200):
        t, kind = propose(g, s, rng)
        kinds.add(kind)
        n = int((t != s).sum())
        assert (kind, n) in {("vertex", 4), ("spin", 1)}
    assert kinds == {"vertex", "spin"}
    fn = lambda x: 0.0  # noqa: E731
    assert metropolis_step(fn, g, s, rng)[1]
    events = {"non_finite": 0}
    nan_fn = lambda x: 0.0 if np.array_equal(x, s) else np.nan  # noqa: E731
    out, acc = metropolis_step(nan_fn, g, s, rng, events)
    assert not acc and np.array_equal(out, s) and events["non_finite"] == 1


def test_exhaustive_batch_weights():
    g = build_lattice(2)
    _, v = kron_ground_state(2, 0.2, 0.1, 0.2)
    b = exhaustive_batch(log_psi_from_vector(v), g)
    np.testing.assert_allclose(b.weights, np.abs(v) ** 2, atol=1e-14)


@pytest.mark.parametrize("rho", [0.0, 0.5, 0.8])
def test_integrated_time_ar1(rho):
    x = ar1(np.random.default_rng(7), rho, (32, 4000))
    tau, degenerate = integrated_time(x)
    assert not degenerate
    assert tau == pytest.approx(rho / (1 - rho), abs=0.1 + 0.05 * rho / (1 - rho))


def test_integrated_time_degenerate():
    assert integrated_time(np.ones((4, 10))) == (0.0, True)


def test_error_bar_coverage_ar1():
    # tau-corrected error bars cover the true mean about 95% of the time at 2 sigma
    rng = np.random.default_rng(9)
    hits = 0
    for _ in range(200):
        x = ar1(rng, 0.7, (8, 256))
        m, se, _ = mean_and_error(x.ravel(), n_chains=8)
        hits += abs(m) < 2 * se
    assert 0.88 <= hits / 200 <= 0.995


def test_split_rhat():
    rng = np.random.default_rng(2)
    assert split_rhat(rng.standard_normal((8, 500))) == pytest.approx(1.0, abs=0.01)
    shifted = rng.standard_normal((8, 500)) + np.arange(8)[:, None]
    assert split_rhat(shifted) > 1.5


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=40))
def test_weighted_mean_is_exact(values):
    v = np.array(values)
    w = np.full(v.size, 1.0 / v.size)
    m, se, tau = mean_and_error(v, weights=w)
    assert m == pytest.approx(v.mean(), abs=1e-12)
    assert se == 0.0


def test_diagnostics():
    g = build_lattice(3)
    fn = lambda S: np.zeros(len(S))  # noqa: E731
    b = run_chains(fn, g, SamplerConfig(n_chains=4, n_burn_in=0, n_subsample=1, samples_per_chain=8))
    d = diagnostics(b, b.configs[:, 0].astype(float))
    assert d.acceptance == 1.0 and d.tau >= 0
    small = run_chains(fn, g, SamplerConfig(n_chains=1, n_burn_in=0, n_subsample=1, samples_per_chain=8))
    with pytest.raises(InvalidArgument):
        diagnostics(small, np.zeros(8))
