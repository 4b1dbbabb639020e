"""Compiled vs pure-numpy kernel timings, plus rank-two vs naive swap coefficients.

    python3 benchmarks/bench_kernels.py [--n 200] [--draws 500] [--repeat 3]
"""

import argparse
import time

import numpy as np

from cpp_predict import _kernels_py
from cpp_predict.conjugate import Dataset, PriorSpec, fit_posterior, swap_coefficients_naive, swap_terms
from cpp_predict.divergences import DivergenceKind
from cpp_predict.solver import scaled_problem

try:
    from cpp_predict import _kernels
except ImportError:  # built without the extension
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def problem(n, p, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X @ rng.standard_normal(p) + rng.standard_normal(n)
    data = Dataset(X, y)
    prior = PriorSpec.default(p)
    return data, prior, fit_posterior(data, prior), rng.standard_normal(p)


def bench_solver(n, p, n_draws, repeat):
    data, prior, state, x_new = problem(n, p)
    draws = np.random.default_rng(1).gamma(50.0, 1 / 50.0, n_draws)
    print(f"solve_scaled: n={n}, p={p}, draws={n_draws}, grid=61")
    for name in ("hellinger", "dpd"):
        sp = scaled_problem(state, data, x_new, DivergenceKind.parse(name))
        args = (sp.m2, sp.c, sp.d, sp.u1, sp.u2, draws, sp.map_prediction, 4.0, 61, 1e-8,
                sp.divergence.code, sp.divergence.alpha_value)
        t_py, (a_py, _, _) = best_of(lambda: _kernels_py.solve_scaled(*args), repeat)
        line = f"  {name:9s} python {t_py * 1e3:8.1f} ms"
        if _kernels is not None:
            t_cy, (a_cy, _, _) = best_of(lambda: _kernels.solve_scaled(*args), repeat)
            line += f"   cython {t_cy * 1e3:8.1f} ms   speedup {t_py / t_cy:5.1f}x   max|diff| {np.abs(a_py - a_cy).max():.1e}"
        print(line)


def bench_swaps(n, p, repeat):
    data, prior, state, x_new = problem(n, p)
    t_fast, _ = best_of(lambda: swap_terms(state, data, x_new), repeat)
    t_naive, _ = best_of(lambda: [swap_coefficients_naive(data, prior, i, x_new) for i in range(n)], 1)
    print(f"swap coefficients, all i: n={n}, p={p}")
    print(f"  rank-two {t_fast * 1e3:8.1f} ms   naive {t_naive * 1e3:8.1f} ms   speedup {t_naive / t_fast:6.1f}x")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=int, default=6)
    ap.add_argument("--draws", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not available; timing the fallback only")
    bench_solver(args.n, args.p, args.draws, args.repeat)
    bench_swaps(2000, 16, args.repeat)


if __name__ == "__main__":
    main()
