"""Benchmark the compiled texture kernels against the numpy fallback.

Runs each kernel on random level grids of a few sizes, checks the two
backends agree exactly, and prints wall-clock times with the speedup.
Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from radflavour.features import _pykernels as pyk
from radflavour.features.kernels import neighbour_shell, unique_directions

try:
    from radflavour.features import _ckernels as ck
except ImportError:
    ck = None


def _random_grid(rng, dims, ng):
    grid = rng.integers(1, ng + 1, size=dims).astype(np.int64)
    grid[rng.random(dims) < 0.3] = 0
    return np.ascontiguousarray(grid)


def _time(fn, args, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if ck is None:
        print("compiled kernels unavailable; nothing to compare")
        return

    rng = np.random.default_rng(0)
    cases = [((16, 16, 8), 16), ((32, 32, 16), 32), ((48, 48, 24), 32)]

    print(f"{'kernel':8} {'dims':>12} {'ng':>4} {'python':>11} "
          f"{'cython':>11} {'speedup':>8}  equal")
    for dims, ng in cases:
        grid = _random_grid(rng, dims, ng)
        dirs = np.ascontiguousarray(unique_directions(dims), dtype=np.int64)
        shell = np.ascontiguousarray(neighbour_shell(dims), dtype=np.int64)
        kernels = [
            ("glcm", "glcm_pair_counts", (grid, ng, dirs)),
            ("glrlm", "glrlm_run_counts", (grid, ng, dirs)),
            ("glszm", "glszm_zones", (grid, ng)),
            ("gldm", "gldm_counts", (grid, ng, shell, 0)),
            ("ngtdm", "ngtdm_sums", (grid, ng, shell)),
        ]
        for name, attr, call_args in kernels:
            t_py, out_py = _time(getattr(pyk, attr), call_args,
                                 repeats=args.repeats)
            t_cy, out_cy = _time(getattr(ck, attr), call_args,
                                 repeats=args.repeats)
            if isinstance(out_py, tuple):
                equal = all(np.array_equal(a, b)
                            for a, b in zip(out_py, out_cy))
            else:
                equal = np.array_equal(out_py, out_cy)
            dims_s = "x".join(str(d) for d in dims)
            print(f"{name:8} {dims_s:>12} {ng:>4} {t_py * 1e3:>9.2f}ms "
                  f"{t_cy * 1e3:>9.2f}ms {t_py / t_cy:>7.1f}x  {equal}")


if __name__ == "__main__":
    main()
