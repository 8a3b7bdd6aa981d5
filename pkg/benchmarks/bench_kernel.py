"""Benchmark the compiled sweep kernel against the pure numpy backend.

Runs both implementations on the two workload shapes that dominate the
recovery experiments (small lattice / large subsample, and large lattice
/ small subsample) plus a mid-sized case, with a fixed sweep budget so
the comparison is sweep-for-sweep.

Usage: python benchmarks/bench_kernel.py [--sweeps N] [--repeats R]
"""

import argparse
import time

import numpy as np

from dinaq._kernel import pure
from dinaq.model import enumerate_profiles, ideal_response_matrix
from dinaq.search import random_qmatrix
from dinaq.simulate import SimConfig, builtin_true_q, generate

try:
    from dinaq._kernel import _core as compiled
except ImportError:
    compiled = None

SHAPES = [
    ("table2-k4", 1000),   # K=4: L=16,  J=15, S=1000
    ("table2-k5", 1000),   # K=5: L=32,  J=15, S=1000
    ("appendix-a1", 500),  # K=8: L=256, J=60, S=500
]


def make_case(name, subset, seed=0):
    true_q = builtin_true_q(name)
    data = generate(SimConfig(true_q=true_q, n_respondents=max(2000, subset),
                              rho=0.1, seed=seed))
    rng = np.random.default_rng(seed)
    x = data.responses.entries[rng.integers(0, data.responses.n_respondents, subset)]
    q = random_qmatrix(true_q.n_items, true_q.n_attributes, rng)
    lattice = enumerate_profiles(true_q.n_attributes)
    eta = ideal_response_matrix(q, lattice)
    resp0 = np.full((subset, lattice.n_classes), 1.0 / lattice.n_classes)
    conc0 = np.ones(lattice.n_classes)
    return x, eta, conc0, resp0


def time_backend(backend, case, sweeps, repeats):
    x, eta, conc0, resp0 = case
    # tol=0 never triggers, so every call runs exactly `sweeps` sweeps
    args = (x, eta, 1.0, 1.0, 1.0, 1.0, conc0, resp0, 0.0, sweeps)
    backend.vb_sweep_loop(*args)  # warm-up
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        backend.vb_sweep_loop(*args)
        best = min(best, time.perf_counter() - start)
    return best / sweeps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sweeps", type=int, default=60)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"{'case':<14} {'S':>5} {'L':>4} {'J':>3} "
          f"{'pure ms/sweep':>14} {'compiled':>10} {'speedup':>8}")
    for name, subset in SHAPES:
        case = make_case(name, subset)
        x, eta, _, _ = case
        t_pure = time_backend(pure, case, args.sweeps, args.repeats)
        if compiled is None:
            print(f"{name:<14} {subset:>5} {eta.shape[0]:>4} {eta.shape[1]:>3} "
                  f"{t_pure * 1e3:>14.3f} {'n/a':>10} {'n/a':>8}")
            continue
        t_comp = time_backend(compiled, case, args.sweeps, args.repeats)
        print(f"{name:<14} {subset:>5} {eta.shape[0]:>4} {eta.shape[1]:>3} "
              f"{t_pure * 1e3:>14.3f} {t_comp * 1e3:>10.3f} "
              f"{t_pure / t_comp:>7.2f}x")


if __name__ == "__main__":
    main()
