"""Benchmark the streaming step: compiled vs pure kernel, sharing vs naive.

Usage: python benchmarks/bench_kernels.py [--frames N] [--joints 25|13]
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from ssnet import kernels
from ssnet.model import Model, ModelConfig
from ssnet.streaming import naive_run_stream, parse_mode, run_stream
from ssnet.synth import SynthConfig, synth_generate
from ssnet.topology import default_topology, parse_topology

SMALL_TREE = {
    "root": 0,
    "children": {
        "0": [1, 8], "1": [2, 3], "2": [4], "4": [5], "3": [6],
        "6": [7], "8": [9], "9": [10, 11], "10": [12],
    },
}


def bench_column_kernel(model, repeats=2000):
    """Isolated per-frame temporal column update, both backends."""
    spec = model.config.spec
    rng = np.random.default_rng(0)
    layers, c = spec.layer_count, spec.channels
    w1 = np.ascontiguousarray(rng.normal(0, 0.1, (layers, 2 * c, c)).astype(np.float32))
    w2 = np.ascontiguousarray(rng.normal(0, 0.1, (layers, 2 * c, c)).astype(np.float32))
    bias = np.ascontiguousarray(rng.normal(0, 0.1, (layers, 2 * c)).astype(np.float32))
    past = rng.normal(0, 1, (layers, c)).astype(np.float32)
    x0 = rng.normal(0, 1, c).astype(np.float32)
    out = np.zeros((layers, c), dtype=np.float32)
    results = {}
    for name in ("python",) + (("compiled",) if kernels.HAVE_COMPILED else ()):
        impl = kernels.get_backend(name)
        impl.temporal_column_step(w1, w2, bias, past, x0, out)  # warm up
        start = time.perf_counter()
        for _ in range(repeats):
            impl.temporal_column_step(w1, w2, bias, past, x0, out)
        results[name] = (time.perf_counter() - start) / repeats
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=600)
    parser.add_argument("--joints", type=int, default=25, choices=(13, 25))
    args = parser.parse_args()

    if args.joints == 25:
        topo = default_topology()
    else:
        topo = parse_topology(json.dumps(SMALL_TREE))
    model = Model.create(ModelConfig(topo, class_count=7), seed=0)
    stream = synth_generate(
        SynthConfig(6, 1, args.frames, (40, 160), (10, 60), 0.01, topo), seed=1
    )[0]

    print(f"model: J={topo.joint_count}, C=50, L=14, window=255")
    print(f"compiled extension available: {kernels.HAVE_COMPILED}")
    print()

    col = bench_column_kernel(model)
    print("temporal column update (one frame, 14 layers):")
    for name, secs in col.items():
        print(f"  {name:>9}: {secs * 1e6:8.1f} us")
    if "compiled" in col:
        print(f"  kernel speedup: {col['python'] / col['compiled']:.2f}x")
    print()

    print(f"full streaming step over {args.frames} frames:")
    rows = []
    for backend in ("python",) + (("compiled",) if kernels.HAVE_COMPILED else ()):
        _, report = run_stream(model, stream, parse_mode("ssnet"), backend=backend)
        rows.append((backend, report))
        print(f"  {backend:>9}: {report.fps:8.0f} fps ({report.seconds:.3f}s)")
    if len(rows) == 2:
        print(f"  end-to-end step speedup: {rows[0][1].seconds / rows[1][1].seconds:.2f}x")
    print()

    _, naive_seconds = naive_run_stream(model, stream, parse_mode("ssnet"))
    best = rows[-1][1]
    print("activation sharing vs naive full-window recompute:")
    print(f"  sharing: {best.fps:8.0f} fps, {best.cols_per_step} activation columns/step")
    print(
        f"  naive:   {args.frames / naive_seconds:8.0f} fps, "
        f"{best.naive_cols_per_step} activation columns/step"
    )
    print(f"  sharing speedup: {naive_seconds / best.seconds:.2f}x")


if __name__ == "__main__":
    main()
