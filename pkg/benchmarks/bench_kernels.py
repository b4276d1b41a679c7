"""Time each kernel under both backends.

Run with ``python3 benchmarks/bench_kernels.py``. Numba timings exclude the
first (compiling) call.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from crosslab import kernels


def _inputs(rng):
    n = 5000
    feats = np.column_stack([np.ones(n), rng.uniform(0, 0.8, n)])
    x = np.sort(rng.uniform(0, 10, 600))
    counts = rng.integers(0, 10, (20, 3)).astype(float)
    return {
        "logit_llgh": (rng.normal(size=4), feats, rng.integers(0, 3, n), np.ones(n)),
        "grid_search": (counts, np.sort(rng.uniform(0, 0.8, 20)), np.arange(-4.0, 4.01, 0.5), 1e-9),
        "lowess": (x, np.sin(x) + rng.normal(0, 0.3, x.size), 240),
        "ecm_path": (rng.uniform(0.4, 0.9, 100_000), rng.normal(size=100_000), -10.0, 28.0, 0.0, -0.4, 0.0, 5.0),
        "clamped_walk": (0.7, rng.normal(0, 0.03, 100_000), 1.0, 0.7, 0.01, 0.99),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    inputs = _inputs(np.random.default_rng(0))
    print(f"{'kernel':<14}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, impls in kernels.KERNELS.items():
        a = inputs[name]
        impls["numba"](*a)
        t_np = best_of(impls["numpy"], a, args.repeat)
        t_nb = best_of(impls["numba"], a, args.repeat)
        print(f"{name:<14}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.1f}x")


if __name__ == "__main__":
    main()
