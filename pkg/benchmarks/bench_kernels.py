"""Throughput comparison of the two stepping kernels.

Runs the same workload through the compiled kernel and the pure-numpy
twin, reporting steps/s. Invoke from the repository root:

    python3 benchmarks/bench_kernels.py [--steps N] [--sites L]
"""

import argparse
import time

import numpy as np

from qecheat import PhysicalParams, derive_coefficients
from qecheat.kernels import kernel_for


def bench(kernel, n_steps: int, n_sites: int, coeffs) -> float:
    temps = np.full(n_sites, 0.010)
    stride = np.int64(1 << 62)
    cap = 4
    samp_g = np.empty(cap, dtype=np.int64)
    samp = [np.empty(cap) for _ in range(5)]
    args = (temps, np.int64(n_steps), np.int64(0), 0.0, 0, -1,
            coeffs.alpha, coeffs.gamma, coeffs.delta, 0.010, 1.0,
            0.0, 0.1, 1.0, 0.0, 0.0,
            0.01, 13.5, 0.25, np.inf, np.int64(1 << 62),
            stride, samp_g, *samp)
    kernel(*args)  # warm up (JIT compile / cache load)
    temps[:] = 0.010
    t0 = time.perf_counter()
    kernel(*args)
    dt = time.perf_counter() - t0
    return n_steps / dt


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2_000_000)
    ap.add_argument("--sites", type=int, default=50)
    args = ap.parse_args()

    coeffs = derive_coefficients(PhysicalParams())
    rates = {}
    for name in ("numpy", "numba"):
        try:
            kernel = kernel_for(name)
        except Exception as exc:
            print(f"{name:>6}: unavailable ({exc})")
            continue
        rate = bench(kernel, args.steps, args.sites, coeffs)
        rates[name] = rate
        print(f"{name:>6}: {rate / 1e6:8.2f} M steps/s "
              f"({args.steps} steps, {args.sites} sites)")
    if len(rates) == 2:
        print(f" ratio: numba/numpy = {rates['numba'] / rates['numpy']:.1f}x")


if __name__ == "__main__":
    main()
