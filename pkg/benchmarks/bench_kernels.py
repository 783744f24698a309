#!/usr/bin/env python3
"""Benchmark the compiled kernels against the scipy-backed reference.

Times the two hot recursions (A-weighting biquad cascade, squared-signal
exponential detector) on a minute of audio, plus the assembled meter on a
longer run. Run after installing the package:

    python benchmarks/bench_kernels.py [--seconds 60] [--repeats 5]
"""

import argparse
import time

import numpy as np

from acslm.kernels import _reference

try:
    from acslm.kernels import _hot
except ImportError:
    _hot = None

RATE = 44100


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seconds", type=float, default=60.0)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    n = int(args.seconds * RATE)
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.standard_normal(n) * 0.05)

    from acslm.weighting import design_frequency_weighting

    sos = np.ascontiguousarray(design_frequency_weighting("A", RATE).sections)
    coeff = float(np.exp(-1.0 / (RATE * 0.125)))
    step = 5512

    backends = [("reference (scipy)", _reference)]
    if _hot is not None:
        backends.append(("compiled (cython)", _hot))
    else:
        print("compiled kernels not importable; benchmarking reference only")

    print(f"signal: {args.seconds:g} s at {RATE} Hz ({n} samples), best of {args.repeats}")
    print(f"{'kernel':<28} {'backend':<20} {'time':>9} {'throughput':>14}")
    results = {}
    for name, impl in backends:
        t = best_of(
            lambda impl=impl: impl.biquad_cascade(x, sos, np.zeros((len(sos), 2))),
            args.repeats,
        )
        results[("biquad", name)] = t
        print(f"{'biquad cascade (4 sos)':<28} {name:<20} {t:8.3f}s {n / t / 1e6:10.1f} Ms/s")
    for name, impl in backends:
        t = best_of(lambda impl=impl: impl.power_detect(x, coeff, 0.0, step, 0), args.repeats)
        results[("detector", name)] = t
        print(f"{'exponential detector':<28} {name:<20} {t:8.3f}s {n / t / 1e6:10.1f} Ms/s")

    if _hot is not None:
        for kernel in ("biquad", "detector"):
            ref = results[(kernel, "reference (scipy)")]
            hot = results[(kernel, "compiled (cython)")]
            print(f"{kernel}: compiled is {ref / hot:.2f}x the reference speed")

    # assembled meter on a longer run, whichever backend is active
    from acslm.kernels import BACKEND
    from acslm.pipeline import ideal_pipeline

    pipeline = ideal_pipeline(RATE)
    long_x = np.tile(x, 5)
    t0 = time.perf_counter()
    stream = pipeline.open_stream()
    stream.feed(long_x)
    stream.result()
    t = time.perf_counter() - t0
    print(
        f"assembled meter ({BACKEND} backend): {len(long_x) / RATE:.0f} s of audio "
        f"in {t:.2f} s ({len(long_x) / t / 1e6:.1f} Ms/s)"
    )


if __name__ == "__main__":
    main()
