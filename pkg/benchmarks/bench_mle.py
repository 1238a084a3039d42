#!/usr/bin/env python3
"""Benchmark the tomography cost kernel: compiled extension vs numpy fallback.

Times raw cost evaluations and full maximum-likelihood reconstructions for
every backend importable in this process. Run after installing the package:

    python benchmarks/bench_mle.py [--trials 20]
"""

import argparse
import time

import numpy as np

from spinorb import _kernels, tomography
from spinorb.experiment import ExperimentConfig, run_bell_pipeline
from spinorb.tomography import mle_reconstruct, split_records


def bench_cost_evals(backend, proj, counts, n_ref, n_evals=50_000):
    cost = _kernels.make_mle_cost(proj, counts, n_ref, tomography.COST_EPS, backend=backend)
    rng = np.random.default_rng(0)
    params = rng.normal(size=(64, 16))
    cost(params[0])  # warm up
    t0 = time.perf_counter()
    for i in range(n_evals):
        cost(params[i % 64])
    dt = time.perf_counter() - t0
    return dt / n_evals


def bench_reconstructions(backend, trials):
    total = 0.0
    nfev = 0
    for i in range(trials):
        cfg = ExperimentConfig(
            target_bell="psi+", n_total=1000, noise="poisson", rng_seed=9000 + i
        )
        counts, ref = split_records(run_bell_pipeline(cfg)[1])
        t0 = time.perf_counter()
        result = mle_reconstruct(counts, ref, backend=backend)
        total += time.perf_counter() - t0
        nfev += result.iterations
    return total / trials, nfev / trials


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=20,
                        help="reconstructions per backend (default 20)")
    parser.add_argument("--evals", type=int, default=50_000,
                        help="raw cost evaluations per backend (default 50000)")
    args = parser.parse_args()

    proj = tomography.block_projectors()
    cfg = ExperimentConfig(target_bell="psi+", n_total=1000, noise="poisson", rng_seed=1)
    counts, ref = split_records(run_bell_pipeline(cfg)[1])
    n = np.array([float(r.counts) for r in counts])

    backends = _kernels.available_backends()
    print(f"backends available: {', '.join(backends)} (default: {_kernels.BACKEND})")
    print()
    print(f"{'backend':<10} {'cost eval':>12} {'reconstruction':>16} {'mean nfev':>10}")
    results = {}
    for backend in backends:
        per_eval = bench_cost_evals(backend, proj, n, float(ref.counts), args.evals)
        per_solve, mean_nfev = bench_reconstructions(backend, args.trials)
        results[backend] = (per_eval, per_solve)
        print(f"{backend:<10} {per_eval * 1e6:>9.2f} us {per_solve * 1e3:>13.1f} ms {mean_nfev:>10.0f}")
    if "cython" in results and "numpy" in results:
        ec, sc = results["cython"]
        en, sn = results["numpy"]
        print()
        print(f"compiled kernel speedup: {en / ec:.1f}x per cost eval, "
              f"{sn / sc:.1f}x per reconstruction")


if __name__ == "__main__":
    main()
