"""Fast self-checks behind ``toricnqs check``.

Each check returns ``(name, passed, detail)``. They are small versions of the
property tests: analytic gradients against finite differences, exact vertex
invariance at identity initialization, sampler stationarity against exact
``|psi|^2``, estimator/oracle equivalence and numba/numpy kernel agreement.
"""

import numpy as np

from . import ansatz as nqs
from . import kernels
from .ed import all_configurations, configs_to_index, exact_ground_state, log_psi_from_vector, pauli_expectation
from .lattice import build_lattice
from .observables import energy, pauli_string_expectation
from .sampler import SamplerConfig, exhaustive_batch, run_chains


def finite_difference_gradient(params, geom, S, eps=1e-3, levels=8):
    """Five-point central differences of log psi along every real coordinate.

    The network is evaluated in extended precision (``np.longdouble``) so that
    roundoff in the difference quotient stays far below 1e-6 relative on
    small components. C-ELU is only C^1, so a stencil that straddles a kink
    of a pre-activation has an O(h) error; the estimate is computed for
    steps ``eps / 2**j`` and, per sample, the step whose value agrees best
    with its two coarser neighbours is kept.
    """
    net = nqs.get_network(params.config, geom.L)
    x = params.real_coordinates().astype(np.longdouble)
    S = np.asarray(S)
    out = np.empty((len(S), x.size), dtype=np.complex128)
    steps = np.longdouble(eps) / 2 ** np.arange(levels)

    def at(k, d):
        y = x.copy()
        y[k] += d
        values = y[0::2] + 1j * y[1::2] if params.is_complex else y
        return net.log_psi(values, S)

    cols = np.arange(len(S))
    for k in range(x.size):
        D = np.array([(8 * (at(k, h) - at(k, -h)) - (at(k, 2 * h) - at(k, -2 * h))) / (12 * h) for h in steps])
        step_change = np.abs(np.diff(D, axis=0))
        spread = np.maximum(step_change[1:], step_change[:-1])
        out[:, k] = D[2 + np.argmin(spread, axis=0), cols]
    return out


def gradient_error(O, fd, floor=1e-8):
    """Largest relative deviation over components with ``|O| > floor``."""
    big = np.abs(O) > floor
    if not big.any():
        return 0.0
    return float(np.max(np.abs(fd[big] - O[big]) / np.abs(O[big])))


def check_gradients(rng):
    worst = 0.0
    for kind in ("combo", "rpp", "rbm"):
        for cplx in (False, True):
            geom = build_lattice(2)
            cfg = nqs.AnsatzConfig(kind=kind, complex_params=cplx, nib_channels=(1, 2), ib_channels=(2, 2), ib_kernel=3)
            p = nqs.init_params(geom, cfg)
            p = p.with_real_coordinates(p.real_coordinates() + 0.3 * rng.standard_normal(p.n_coordinates))
            s = rng.choice(np.array([-1, 1], dtype=np.int8), size=(2, geom.n_edges))
            worst = max(worst, gradient_error(nqs.log_gradient(p, geom, s), finite_difference_gradient(p, geom, s)))
    return "gradient", worst < 1e-6, f"max relative error {worst:.2e}"


def check_invariance(rng):
    geom = build_lattice(2)
    p = nqs.init_params(geom, nqs.AnsatzConfig(ib_kernel=3, seed=int(rng.integers(1 << 31))))
    S = all_configurations(geom)
    lp = nqs.log_amplitude(p, geom, S)
    worst = 0.0
    for v in range(geom.n_vertices):
        worst = max(worst, float(np.max(np.abs(nqs.log_amplitude(p, geom, S * geom.vertex_flip_signs[v]) - lp))))
    return "invariance", worst == 0.0, f"max |dlog psi| {worst:.1e}"


def check_sampler(rng):
    geom = build_lattice(2)
    st = exact_ground_state(geom, (0.2, 0.0, 0.2))
    cfg = SamplerConfig(n_chains=500, n_burn_in=4, n_subsample=8, samples_per_chain=200, seed=int(rng.integers(1 << 31)))
    batch = run_chains(log_psi_from_vector(st.vector), geom, cfg)
    emp = np.bincount(configs_to_index(batch.configs), minlength=16) / batch.size
    tv = 0.5 * float(np.abs(emp - st.probabilities).sum())
    return "sampler", tv < 0.02, f"total variation {tv:.4f} over {batch.size} samples"


def check_oracle(rng):
    geom = build_lattice(2)
    h = (0.2, 0.1, 0.2)
    st = exact_ground_state(geom, h)
    fn = log_psi_from_vector(st.vector)
    batch = exhaustive_batch(fn, geom)
    E, _ = energy(fn, geom, h, batch)
    err = abs(E.real - st.energy)
    string = [(0, "X"), (1, "Y"), (3, "Z")]
    err = max(err, abs(pauli_string_expectation(fn, geom, string, batch).raw - pauli_expectation(st, string)))
    return "oracle", err < 1e-10, f"max deviation {err:.1e}"


def check_kernels(rng):
    x = rng.standard_normal((2, 3, 6, 6)) + 1j * rng.standard_normal((2, 3, 6, 6))
    w = rng.standard_normal((4, 3, 3, 3)) + 1j * rng.standard_normal((4, 3, 3, 3))
    g = rng.standard_normal((2, 4, 4, 4)) + 1j * rng.standard_normal((2, 4, 4, 4))
    err = max(
        np.abs(kernels.conv2d_valid_numba(x, w) - kernels.conv2d_valid_numpy(x, w)).max(),
        np.abs(kernels.conv2d_grad_input_numba(g, w, (6, 6)) - kernels.conv2d_grad_input_numpy(g, w, (6, 6))).max(),
        np.abs(kernels.conv2d_grad_weight_numba(x, g, (3, 3)) - kernels.conv2d_grad_weight_numpy(x, g, (3, 3))).max(),
    )
    return "kernels", err < 1e-12, f"numba/numpy max deviation {err:.1e}"


CHECKS = (check_gradients, check_invariance, check_sampler, check_oracle, check_kernels)


def run_all(seed=0):
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
