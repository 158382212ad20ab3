"""Compiled vs pure-Python kernels on desk-sized inputs.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from edgecache import _pykernels

try:
    from edgecache import _ckernels
except ImportError:
    _ckernels = None


def best_response_args(rng, K=10, M=5):
    power = np.full(K, 0.5)
    h = rng.exponential(size=K) * 1e-10
    return (rng.integers(0, M + 1, K), np.ones(K, dtype=np.int8), power * h, power,
            rng.uniform(8e6, 16e6, K), rng.uniform(0.5, 2.0, K), rng.uniform(0.0, 0.2, K),
            5.0, 30e6, 2e-13, M)


def knapsack_args(rng, F=20, cap=150):
    return rng.uniform(-1, 1, F), rng.integers(10, 51, F), cap


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    cases = {
        "best_responses (K=10, M=5)": ("best_responses", best_response_args(rng)),
        "knapsack_tables (F=20, cap=150)": ("knapsack_tables", knapsack_args(rng)),
        "knapsack_tables (F=50, cap=1000)": ("knapsack_tables", knapsack_args(rng, 50, 1000)),
    }
    print(f"{'kernel':34} {'python us':>10} {'cython us':>10} {'speedup':>8}")
    for label, (name, a) in cases.items():
        py = getattr(_pykernels, name)
        t_py = min(timeit.repeat(lambda: py(*a), number=args.repeat // 10, repeat=5))
        t_py *= 1e6 / (args.repeat // 10)
        if _ckernels is None:
            print(f"{label:34} {t_py:10.1f} {'n/a':>10} {'':>8}")
            continue
        cy = getattr(_ckernels, name)
        t_cy = min(timeit.repeat(lambda: cy(*a), number=args.repeat, repeat=5)) * 1e6 / args.repeat
        print(f"{label:34} {t_py:10.1f} {t_cy:10.1f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
