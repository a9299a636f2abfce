#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy reference.

Run after building the extension (pip install -e . --no-build-isolation):

    python3 benchmarks/bench_kernels.py [--candidates 50000] [--dim 256]
"""

import argparse
import time

import numpy as np

from sensegraft.kernels import _ref

try:
    from sensegraft.kernels import _fast
except ImportError:
    _fast = None


def _time(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--candidates", type=int, default=50_000)
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--layers", type=int, default=25)
    ap.add_argument("--tokens", type=int, default=128)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    matrix = np.ascontiguousarray(rng.standard_normal((args.candidates, args.dim)))
    query = np.ascontiguousarray(rng.standard_normal(args.dim))
    logits = np.ascontiguousarray(rng.standard_normal(args.candidates))
    hidden = np.ascontiguousarray(rng.standard_normal((args.layers, args.tokens, args.dim)))
    weights = np.full(args.layers, 1.0 / args.layers)

    cases = [
        ("dot_scores", (matrix, query)),
        ("cosine_scores", (matrix, query)),
        ("softmax", (logits,)),
        ("pool_span", (hidden, weights, 0, args.tokens)),
    ]

    print(f"candidates={args.candidates} dim={args.dim} layers={args.layers} tokens={args.tokens}")
    print(f"{'kernel':<14} {'numpy (ms)':>12} {'compiled (ms)':>14} {'speedup':>9}")
    for name, call_args in cases:
        t_ref = _time(getattr(_ref, name), *call_args)
        if _fast is None:
            print(f"{name:<14} {1e3 * t_ref:12.3f} {'n/a':>14} {'n/a':>9}")
            continue
        t_fast = _time(getattr(_fast, name), *call_args)
        a = np.asarray(getattr(_ref, name)(*call_args))
        b = np.asarray(getattr(_fast, name)(*call_args))
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12), f"{name}: backends disagree"
        print(f"{name:<14} {1e3 * t_ref:12.3f} {1e3 * t_fast:14.3f} {t_ref / t_fast:9.2f}x")


if __name__ == "__main__":
    main()
