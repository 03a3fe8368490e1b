"""Benchmark the compiled kernels against the pure numpy fallback.

Usage: python benchmarks/bench_kernels.py [--size 512] [--cells 30] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cellseg import LabelMap, SynthSpec, synth_instances
from cellseg import _dispatch


def build_inputs(size: int, cells: int):
    spec = SynthSpec(
        width=size,
        height=size,
        cells=cells,
        radius_range=(12, 20),
        peak_range=(12.0, 21.0),
        seed=0,
    )
    gt, dist, mask = synth_instances(spec)
    f = dist.samples
    marker = f - np.float32(10.0)
    seeds = np.zeros_like(gt.labels)
    for k in gt.distinct_labels():
        ys, xs = np.nonzero(gt.labels == k)
        i = int(np.argmax(f[ys, xs]))
        seeds[ys[i], xs[i]] = k
    return {
        "reconstruct_dilation": (marker, f, 8),
        "regional_maxima": (f, 8),
        "label_components": (mask.bits, 8),
        "instance_edt": (gt.labels,),
        "watershed_flood": (f, seeds, mask.bits, 8),
    }


def time_call(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--cells", type=int, default=30)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not _dispatch.compiled_available():
        print("compiled kernels unavailable; nothing to compare")
        return

    inputs = build_inputs(args.size, args.cells)
    from cellseg import _kernels, _pykernels

    print(f"kernel timings on {args.size}x{args.size}, {args.cells} cells (best of {args.repeat})")
    print(f"{'kernel':<22} {'compiled':>12} {'pure':>12} {'speedup':>9}")
    for name, call_args in inputs.items():
        tc = time_call(getattr(_kernels, name), call_args, args.repeat)
        tp = time_call(getattr(_pykernels, name), call_args, args.repeat)
        # both lanes must agree bit for bit on the same inputs
        a = getattr(_kernels, name)(*call_args)
        b = getattr(_pykernels, name)(*call_args)
        if isinstance(a, tuple):
            assert a[1] == b[1] and np.array_equal(a[0], b[0]), name
        else:
            assert np.array_equal(a, b), name
        print(f"{name:<22} {tc * 1e3:>10.2f}ms {tp * 1e3:>10.2f}ms {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
