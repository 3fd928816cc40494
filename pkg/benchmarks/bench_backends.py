#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs each hot kernel on a representative workload with both backends and
prints per-call timings plus the speedup. Invoke directly:

    python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from leakseg._kernels import (EXP_TABLE, EXP_TABLE_SCALE, EXP_TABLE_UMAX,
                              numpy_impl)

try:
    from leakseg._kernels import numba_impl
except ImportError:
    numba_impl = None


def timeit(fn, repeats):
    fn()  # warm-up (JIT compile / cache load)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_morphology(rng, repeats):
    bits = rng.random((240, 320)) < 0.3

    def make(impl):
        return lambda: impl.dilate(impl.erode(bits, 3, 3, 1, 1), 3, 3, 1, 1)

    return "morph open 3x3 @ 320x240", make


def bench_mog2(rng, repeats):
    k, h, w = 5, 240, 320
    frame = rng.integers(0, 256, (h, w)).astype(np.float64)

    def make(impl):
        weights = np.zeros((k, h, w))
        means = np.zeros((k, h, w))
        variances = np.zeros((k, h, w))
        weights[0] = 1.0
        means[0] = frame
        variances[0] = 15.0
        noisy = [np.clip(frame + rng.normal(0, 6, (h, w)), 0, 255)
                 for _ in range(4)]
        state = {"i": 0}

        def step():
            state["i"] += 1
            impl.mog2_update(weights, means, variances,
                             noisy[state["i"] % 4], 1 / 30, 15.0, 4.0, 75.0,
                             16.0, 0.9)
        return step

    return "mog2 update @ 320x240 K=5", make


def bench_knn(rng, repeats):
    cap, h, w = 21, 240, 320

    def make(impl):
        samples = rng.integers(0, 256, (cap, h, w)).astype(np.uint8)
        counts = np.full((h, w), cap, dtype=np.int32)
        frame = rng.integers(0, 256, (h, w)).astype(np.uint8)
        slots = rng.integers(0, cap, (h, w)).astype(np.int32)
        return lambda: impl.knn_background(samples, counts, frame, slots,
                                           400.0, 2)

    return "knn update @ 320x240 cap=21", make


def bench_render(rng, repeats):
    n = 120
    cx = rng.uniform(0, 320, n)
    cy = rng.uniform(0, 240, n)
    sigma = rng.uniform(3, 15, n)
    amp = rng.uniform(0.01, 0.7, n)
    ucut = np.minimum(np.log(amp / 5e-4), EXP_TABLE_UMAX)

    def make(impl):
        def step():
            out = np.zeros((240, 320))
            impl.render_puffs(out, cx, cy, sigma, amp, ucut, EXP_TABLE,
                              EXP_TABLE_SCALE)
        return step

    return "render 120 puffs @ 320x240", make


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    print(f"{'kernel':<30} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for bench in (bench_morphology, bench_mog2, bench_knn, bench_render):
        name, make = bench(rng, args.repeats)
        t_np = timeit(make(numpy_impl), args.repeats)
        if numba_impl is None:
            print(f"{name:<30} {t_np * 1e3:9.2f}ms {'n/a':>10} {'n/a':>8}")
            continue
        t_nb = timeit(make(numba_impl), args.repeats)
        print(f"{name:<30} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms "
              f"{t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
