"""Benchmark the compiled kernel backend against the pure-Python fallback.

Run:  python benchmarks/bench_kernels.py
"""
import time

import numpy as np

from cechbetti import _pykernels

try:
    from cechbetti import _ckernels
except ImportError:
    _ckernels = None

RNG = np.random.default_rng(2024)


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_meb_radius(impl):
    pts = [RNG.uniform(-1, 1, size=(m, 3)) for m in RNG.integers(2, 8, size=2000)]

    def run():
        for p in pts:
            impl.meb_radius(p)

    return timeit(run)


def bench_meb_radius_batch(impl):
    configs = RNG.uniform(-1, 1, size=(20_000, 4, 2))
    return timeit(impl.meb_radius_batch, configs)


def bench_gf2_reduce(impl):
    ncols = 4000
    cols = []
    for j in range(ncols):
        if j < 10:
            cols.append(np.empty(0, dtype=np.int64))
            continue
        nz = np.sort(RNG.choice(j, size=min(j, int(RNG.integers(2, 8))), replace=False))
        cols.append(nz.astype(np.int64))
    offsets = np.zeros(ncols + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(c) for c in cols])
    faces = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    return timeit(impl.gf2_reduce, offsets, faces)


def main():
    benches = [
        ("meb_radius x2000", bench_meb_radius),
        ("meb_radius_batch 20k x4pts", bench_meb_radius_batch),
        ("gf2_reduce 4k cols", bench_gf2_reduce),
    ]
    print(f"{'kernel':<30}{'pure (s)':>12}{'compiled (s)':>14}{'speedup':>10}")
    for name, bench in benches:
        t_pure = bench(_pykernels)
        if _ckernels is None:
            print(f"{name:<30}{t_pure:>12.4f}{'n/a':>14}{'n/a':>10}")
            continue
        t_c = bench(_ckernels)
        print(f"{name:<30}{t_pure:>12.4f}{t_c:>14.4f}{t_pure / t_c:>9.1f}x")
    if _ckernels is None:
        print("compiled backend not available; showing pure timings only")


if __name__ == "__main__":
    main()
