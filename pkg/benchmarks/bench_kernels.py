"""Time the numba and numpy kernel backends on identical inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--size 20000]
"""
import argparse
import time

import numpy as np

from petweedie import kernels


def cases(n, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 30, n)
    z = rng.gamma(2.0, 1.5, n)
    x = rng.standard_exponential(n)
    lam = x * 0.8
    return {
        "cpg_logdensity": lambda b: kernels.cpg_logdensity(
            z, 1.2, 2.0, 0.7, backend=b),
        "cpg_poisson_logpmf": lambda b: kernels.cpg_poisson_logpmf(
            y, 1.2, 2.0, 0.7, backend=b),
        "stable_series_logdensity": lambda b: kernels.stable_series_logdensity(
            z, 0.5, np.log(0.5), backend=b),
        "stable_integral_logdensity": lambda b: kernels.stable_integral_logdensity(
            z, 0.5, np.log(0.5), backend=b),
        "tilted_stable_rvs(split)": lambda b: kernels.tilted_stable_rvs(
            lam, 1.0, 0.5, np.random.default_rng(seed), 10**6, backend=b),
        "tilted_stable_rvs(double)": lambda b: kernels.tilted_stable_rvs(
            lam * 20.0, 1.0, 0.5, np.random.default_rng(seed), 10**6, backend=b),
    }


def timed(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    print(f"{'kernel':30s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>9s}")
    for name, fn in cases(args.size, args.seed).items():
        fn("numba")  # compile
        t_nb = timed(lambda: fn("numba"), args.repeat)
        t_np = timed(lambda: fn("numpy"), args.repeat)
        print(f"{name:30s} {1e3 * t_nb:12.2f} {1e3 * t_np:12.2f} {t_np / t_nb:9.1f}x")


if __name__ == "__main__":
    main()
