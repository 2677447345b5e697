#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from nsdstab._kernels import _numpy as fallback

try:
    from nsdstab._kernels import _native as native
except ImportError:
    native = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_rk4(impl):
    rng = np.random.default_rng(1)
    f = rng.normal(size=(8, 8)) - 3.0 * np.eye(8)
    y0 = rng.normal(size=8)
    return lambda: impl.rk4_trajectory(f, y0, 1e-3, 100_000)


def bench_eigmin(impl):
    rng = np.random.default_rng(2)
    mats = [rng.normal(size=(3, 3)) for _ in range(2000)]
    ds = [rng.uniform(0.1, 1.0, size=3) for _ in range(2000)]

    def run():
        for m, d in zip(mats, ds):
            impl.eigmin_scaled(m, d)

    return run


def bench_grad(impl):
    rng = np.random.default_rng(3)
    mats = [rng.normal(size=(4, 4)) for _ in range(1000)]
    ds = [rng.uniform(0.1, 1.0, size=4) for _ in range(1000)]

    def run():
        for m, d in zip(mats, ds):
            impl.eigmin_scaled_grad(m, d)

    return run


def bench_grid2(impl):
    rng = np.random.default_rng(4)
    mats = [rng.normal(size=(2, 2)) for _ in range(100)]
    return lambda: [impl.margin_grid_2x2(m, 1e-9, 1 - 1e-9, 100_000) for m in mats]


def bench_grid3(impl):
    rng = np.random.default_rng(5)
    mats = [rng.normal(size=(3, 3)) for _ in range(20)]
    return lambda: [impl.margin_grid_3(m, 140, 1e-12) for m in mats]


BENCHES = [
    ("rk4_trajectory (dim 8, 1e5 steps)", bench_rk4),
    ("eigmin_scaled (2000 x 3x3)", bench_eigmin),
    ("eigmin_scaled_grad (1000 x 4x4)", bench_grad),
    ("margin_grid_2x2 (100 x 1e5 pts)", bench_grid2),
    ("margin_grid_3 (20 x ~1e4 pts)", bench_grid3),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    impls = [("numpy", fallback)]
    if native is not None:
        impls.append(("native", native))
    else:
        print("native kernels not built; timing the fallback only")

    width = max(len(name) for name, _ in BENCHES)
    header = f"{'benchmark':<{width}}  " + "  ".join(f"{n:>10}" for n, _ in impls)
    if len(impls) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, make in BENCHES:
        times = [timeit(make(impl), args.repeat) for _, impl in impls]
        row = f"{name:<{width}}  " + "  ".join(f"{t * 1e3:9.2f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
