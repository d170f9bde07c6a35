"""Numba vs numpy timings for the hot kernels and one full training step.

    python benchmarks/bench_kernels.py [--repeat N]

Kernel timings call both flavours in-process. The end-to-end step (batch
gradient + local energies + SR solve at L=3) runs in subprocesses with
TORICNQS_NUMBA set to 1 and 0, since the backend is fixed at import.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from toricnqs import kernels
from toricnqs.ed import HamiltonianOperator
from toricnqs.lattice import build_lattice

STEP_SCRIPT = """
import time, numpy as np
from toricnqs import ansatz as nqs
from toricnqs.ed import all_configurations, configs_to_index
from toricnqs.hamiltonian import ConnectedBatch, local_energies
from toricnqs.lattice import build_lattice
from toricnqs.optimizer import SRConfig, estimate_sr_quantities, sr_update
g = build_lattice(3)
h = (0.2, 0.0, 0.2)
p = nqs.init_params(g, nqs.AnsatzConfig(nib_channels=(2,), ib_channels=(4, 4), ib_kernel=3))
S = all_configurations(g)
conn = ConnectedBatch(g, h)
def step():
    lp, O = nqs.log_amplitude_and_gradient(p, g, S)
    w = np.exp(2 * (lp - lp.max())); w /= w.sum()
    el = local_energies(g, h, lambda X: lp[configs_to_index(X)], S, lp, conn)
    sr_update(estimate_sr_quantities(O, el, None, w), SRConfig())
step()
t = time.perf_counter()
for _ in range({repeat}):
    step()
print((time.perf_counter() - t) / {repeat})
"""


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_cases(rng):
    B, Ci, Co, H, K = 1024, 4, 4, 4, 3
    x = rng.standard_normal((B, Ci, H + K - 1, H + K - 1)) + 1j * rng.standard_normal((B, Ci, H + K - 1, H + K - 1))
    w = rng.standard_normal((Co, Ci, K, K)) + 1j * rng.standard_normal((Co, Ci, K, K))
    g = rng.standard_normal((B, Co, H, H)) + 1j * rng.standard_normal((B, Co, H, H))
    yield "conv2d_valid", lambda m: getattr(kernels, f"conv2d_valid_{m}")(x, w)
    # sampler-sized call: one proposal batch through a narrow layer
    xs = x[:128, :1]
    ws = w[:2, :1]
    yield "conv2d_valid (B=128, 1->2)", lambda m: getattr(kernels, f"conv2d_valid_{m}")(xs, ws)
    yield "conv2d_grad_input", lambda m: getattr(kernels, f"conv2d_grad_input_{m}")(g, w, x.shape[2:])
    yield "conv2d_grad_weight", lambda m: getattr(kernels, f"conv2d_grad_weight_{m}")(x, g, (K, K))

    geom = build_lattice(3)
    op = HamiltonianOperator(geom, (0.2, 0.1, 0.2))
    v = rng.standard_normal(1 << geom.n_edges) + 0j
    args = (op.diag, op.vertex_masks, geom.n_edges, 0.2, 0.1)
    yield "hamiltonian_matvec (L=3)", lambda m: getattr(kernels, f"hamiltonian_matvec_{m}")(v, *args)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, call in kernel_cases(rng):
        tn = best_of(lambda: call("numba"), args.repeat)
        tp = best_of(lambda: call("numpy"), args.repeat)
        print(f"{name:<28}{1e3 * tn:12.2f}{1e3 * tp:12.2f}{tp / tn:10.1f}")
    step = {}
    for flag in ("1", "0"):
        env = {**os.environ, "TORICNQS_NUMBA": flag}
        out = subprocess.run([sys.executable, "-c", STEP_SCRIPT.format(repeat=args.repeat)], env=env,
                             capture_output=True, text=True, check=True)
        step[flag] = float(out.stdout.split()[-1])
    print(f"{'SR step, L=3 exhaustive':<28}{1e3 * step['1']:12.2f}{1e3 * step['0']:12.2f}{step['0'] / step['1']:10.1f}")


if __name__ == "__main__":
    main()
