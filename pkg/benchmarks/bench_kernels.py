"""Timing comparison of the numba and pure-numpy kernel paths.

Run:  python benchmarks/bench_kernels.py

Covers the three hot spots: fused activation-derivative maps on a
training-step-sized block, the radix-2 FFT at the pricer's default size,
and Sobol generation at sample-set scale.  Matrix products are BLAS on
both paths and are shown once for context.
"""

import time

import numpy as np

from pidenn import kernels
from pidenn.sampling import _direction_matrix


def timeit(fn, *args, repeat=7):
    fn(*args)  # warm up / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rows = []
    z = np.random.default_rng(0).normal(size=(29600, 64)) * 2.0
    for name in ("silu_g_gp", "silu_g_gp_gpp", "softplus_g_gp"):
        entry = {"kernel": f"{name} (29600x64)"}
        for impl in kernels.IMPLS:
            entry[impl] = timeit(kernels.IMPLS[impl][name], z)
        rows.append(entry)

    x = (np.random.default_rng(1).normal(size=1 << 14)
         + 1j * np.random.default_rng(2).normal(size=1 << 14))
    entry = {"kernel": "fft (2^14)"}
    for impl in kernels.IMPLS:
        entry[impl] = timeit(kernels.IMPLS[impl]["fft"], x)
    rows.append(entry)

    v = _direction_matrix(7)
    entry = {"kernel": "sobol_ints (2^17 x 7)"}
    for impl in kernels.IMPLS:
        entry[impl] = timeit(kernels.IMPLS[impl]["sobol_ints"], v, 1, 1 << 17)
    rows.append(entry)

    a = np.random.default_rng(3).normal(size=(29600, 64))
    b = np.random.default_rng(4).normal(size=(64, 64))
    blas = timeit(lambda: a @ b)
    impls = [k for k in ("numba", "numpy") if k in kernels.IMPLS]
    width = max(len(r["kernel"]) for r in rows)
    print(f"active path: {kernels.ACTIVE}")
    header = "  ".join([f"{'kernel':<{width}}"] + [f"{k:>12}" for k in impls] + ["ratio"])
    print(header)
    print("-" * len(header))
    for r in rows:
        cells = [f"{r['kernel']:<{width}}"]
        for k in impls:
            cells.append(f"{r[k]*1e3:>10.2f}ms")
        if len(impls) == 2:
            cells.append(f"{r[impls[1]] / r[impls[0]]:>5.2f}x")
        print("  ".join(cells))
    print(f"\ncontext: BLAS matmul (29600x64)@(64x64): {blas*1e3:.2f}ms")
    if "numba" not in kernels.IMPLS:
        print("numba path unavailable (not installed or PIDENN_NO_NUMBA=1)")


if __name__ == "__main__":
    main()
