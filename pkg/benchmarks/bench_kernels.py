"""Compare the compiled kernel backend against the numpy fallback.

Times the raw data-movement kernels and a full training step of the toy
CNN at the standard batch size, for both float64 and float32. Run:

    python benchmarks/bench_kernels.py [--batch 128] [--repeats 5]
"""

import argparse
import time

import numpy as np

import walab.kernels as kernels
from walab.nn import Batch, backward, init_weights, toy_cnn_spec


def timeit(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench(batch_size: int, repeats: int):
    spec = toy_cnn_spec()
    w = init_weights(spec, 0)
    rng = np.random.default_rng(0)
    batch = Batch(rng.random((batch_size, 3, 32, 32)), rng.integers(0, 10, batch_size))

    rows = []
    for dtype in (np.float64, np.float32):
        # shapes of the second conv layer (the heavier of the two)
        xp = np.ascontiguousarray(rng.normal(size=(batch_size, 18, 18, 16)), dtype=dtype)
        cols = np.ascontiguousarray(rng.normal(size=(batch_size * 16 * 16, 9 * 16)), dtype=dtype)
        pooled = np.ascontiguousarray(rng.normal(size=(batch_size, 32, 32, 16)), dtype=dtype)
        for name in kernels.available_backends():
            kernels.set_backend(name)
            rows.append((
                np.dtype(dtype).name,
                name,
                timeit(lambda: kernels.im2col(xp, 3), repeats) * 1e3,
                timeit(lambda: kernels.col2im_add(cols, 3, batch_size, 18, 18, 16), repeats) * 1e3,
                timeit(lambda: kernels.maxpool_forward(pooled, 2), repeats) * 1e3,
                timeit(lambda: backward(spec, w, batch, dtype), repeats) * 1e3,
            ))

    print(f"toy CNN, batch {batch_size}, {repeats} repeats (times in ms)")
    print(f"{'dtype':8s} {'backend':8s} {'im2col':>8s} {'col2im':>8s} {'maxpool':>8s} {'full step':>10s}")
    for dtype, name, a, b, c, d in rows:
        print(f"{dtype:8s} {name:8s} {a:8.2f} {b:8.2f} {c:8.2f} {d:10.2f}")

    if "cython" not in kernels.available_backends():
        print("\ncompiled backend not built; only the numpy fallback was timed")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    bench(args.batch, args.repeats)
