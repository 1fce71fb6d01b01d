"""Compare the numba and numpy exposure kernels on identical random input.

Run with ``python3 benchmarks/kernel_bench.py``.  Prints one timing line per
backend and per shape, and checks that both backends agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ringdot import _kernels


def _time(fn, floats, n_malicious, ring, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        T, _, m = floats.shape
        covered = np.zeros((T, m), dtype=np.bool_)
        first = np.zeros(T, dtype=np.int64)
        t0 = time.perf_counter()
        fn(floats, n_malicious, ring, covered, first, 0)
        best = min(best, time.perf_counter() - t0)
        out = first
    return best, out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=20_000)
    parser.add_argument("--occurrences", type=int, default=16)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    if _kernels.update_numba is None:
        print(f"numba disabled ({_kernels.ENV_FLAG} set or numba missing); timing numpy only")
    rng = np.random.default_rng(0)
    for n, k in ((7, 5), (11, 4), (21, 10)):
        floats = rng.random((args.trials, args.occurrences, n - 1))
        ring = n % 2 == 0
        t_np, first_np = _time(_kernels.update_numpy, floats, k - 1, ring, args.repeats)
        print(f"n={n:3d} k={k:2d} numpy  {t_np * 1e3:9.2f} ms")
        if _kernels.update_numba is not None:
            _time(_kernels.update_numba, floats[:2], k - 1, ring, 1)
            t_nb, first_nb = _time(_kernels.update_numba, floats, k - 1, ring, args.repeats)
            agree = bool(np.array_equal(first_np, first_nb))
            print(f"n={n:3d} k={k:2d} numba  {t_nb * 1e3:9.2f} ms  speedup {t_np / t_nb:5.1f}x  agree={agree}")


if __name__ == "__main__":
    main()
