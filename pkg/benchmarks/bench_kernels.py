"""Compare the compiled and pure-numpy kernel paths on the per-image
optimization loop, the dominant cost of a pipeline run.

Usage: python3 benchmarks/bench_kernels.py [--d 64] [--iters 1000] [--images 50]

The compiled path must be active (PROXYCLUST_NO_NUMBA unset); the numpy
numbers come from the kernels' retained .py_func originals, so both paths
run the same statements on the same inputs in one process.
"""

import argparse
import time

import numpy as np

from proxyclust import kernels


def make_problem(d, seed):
    rng = np.random.default_rng(seed)
    lim = np.sqrt(3.0 / d)
    img = rng.normal(size=d)
    return dict(
        p_base=rng.normal(scale=0.2, size=d),
        inv_len=0.25,
        W1=rng.uniform(-lim, lim, size=(d, d)),
        b1=rng.uniform(-0.1, 0.1, size=d),
        W2=rng.uniform(-lim, lim, size=(d, d)),
        b2=rng.uniform(-0.1, 0.1, size=d),
        image=img / np.linalg.norm(img),
        z=rng.normal(scale=0.2, size=d),
        U=rng.normal(scale=0.3, size=(2, d)),
    )


def run(fn, problems, iters):
    results = []
    start = time.perf_counter()
    for p in problems:
        results.append(fn(
            p["p_base"], p["inv_len"], p["W1"], p["b1"], p["W2"], p["b2"],
            p["image"], p["z"], p["U"], 0,
            0.4, 0.3, 1e-4, 0.005, 0.9, 0.999, 1e-8, iters))
    return time.perf_counter() - start, results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--iters", type=int, default=1000)
    ap.add_argument("--images", type=int, default=50)
    args = ap.parse_args()

    if not kernels.USE_NUMBA:
        raise SystemExit("run without PROXYCLUST_NO_NUMBA to compare both paths")

    problems = [make_problem(args.d, seed) for seed in range(args.images)]
    # Warm the JIT cache outside the timed region.
    run(kernels._optimize_core, problems[:1], 2)

    jit_time, jit_res = run(kernels._optimize_core, problems, args.iters)
    py_time, py_res = run(kernels._optimize_core.py_func, problems, args.iters)

    drift = max(float(np.max(np.abs(a[0] - b[0]))) for a, b in zip(jit_res, py_res))
    per = args.images * args.iters
    print(f"problem: d={args.d}, {args.images} images x {args.iters} Adam steps")
    print(f"numba : {jit_time:8.3f}s  ({1e6 * jit_time / per:7.2f} us/step)")
    print(f"numpy : {py_time:8.3f}s  ({1e6 * py_time / per:7.2f} us/step)")
    print(f"speedup: {py_time / jit_time:.1f}x, max |w| drift between paths: {drift:.3g}")


if __name__ == "__main__":
    main()
