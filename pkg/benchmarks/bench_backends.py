"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import time

import numpy as np

from robust_sysid import backends
from robust_sysid.backends import pure


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    mods = [("pure", pure)]
    try:
        mods.append(("compiled", backends.get_module("compiled")))
    except ImportError:
        print("compiled backend not built; benchmarking pure only")

    rng = np.random.default_rng(0)
    A_tall = rng.standard_normal((495, 25))
    B_tall = rng.standard_normal((495, 10))
    S = rng.standard_normal((25, 25))
    S = S + S.T
    Q = rng.standard_normal((25, 25))
    SPD = Q @ Q.T + 25 * np.eye(25)
    RHS = rng.standard_normal((25, 10))
    phi = rng.standard_normal((25, 495))
    signs = rng.choice([-1.0, 1.0], 495)
    zb = rng.standard_normal((1000, 10, 25))
    zb /= np.sqrt((zb**2).sum(axis=(1, 2), keepdims=True))
    n, m, r, T = 20, 5, 10, 500
    Am = rng.uniform(-1, 1, (n, n)) * 0.1
    Bm = rng.uniform(-1, 1, (n, m))
    Cm = rng.uniform(-1, 1, (r, n))
    Dm = rng.uniform(-1, 1, (r, m))
    x0 = rng.standard_normal(n)
    U = rng.standard_normal((T, m))
    W = np.zeros((T, n))
    u1 = rng.standard_normal(2000)
    w1 = np.zeros(2000)

    cases = [
        ("householder_lstsq 495x25 rhs=10", lambda mod: mod.householder_lstsq(A_tall, B_tall)),
        ("jacobi_eigh 25x25", lambda mod: mod.jacobi_eigh(S)),
        ("cholesky_solve 25x25 rhs=10", lambda mod: mod.cholesky_solve(SPD, RHS)),
        ("signed_norm_sums 1000 dirs", lambda mod: mod.signed_norm_sums(phi, signs, zb)),
        ("run_activated T=500 n=20", lambda mod: mod.run_activated(Am, Bm, Cm, Dm, x0, U, W, 0, 1e12)),
        ("run_scalar T=2000", lambda mod: mod.run_scalar(0.5, 1.0, 0.0, u1, w1, False, 1e12)),
    ]

    width = max(len(name) for name, _ in cases)
    header = f"{'kernel':<{width}} " + " ".join(f"{name:>12}" for name, _ in mods)
    if len(mods) == 2:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, fn in cases:
        times = [timeit(lambda m=mod: fn(m), args.repeat) for _, mod in mods]
        line = f"{name:<{width}} " + " ".join(f"{t * 1e3:>10.3f}ms" for t in times)
        if len(times) == 2:
            line += f" {times[0] / times[1]:>8.1f}x"
        print(line)


if __name__ == "__main__":
    main()
