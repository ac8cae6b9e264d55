"""Timing comparison of the compiled and pure-numpy convolution kernels.

Runs each of the six kernel entry points on shapes matching the map and
skeleton encoders, reports per-call wall time for both backends, and
checks that their outputs agree. Usage:

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from smart_har.nn.kernels import HAVE_CYTHON, get_backend

CASES = [
    # name, builder returning (fn_name, args) given a module
    ("conv2d fwd 16x1x64x64 k3 s2",
     lambda: ("conv2d_forward",
              (np.random.rand(16, 1, 64, 64), np.random.rand(8, 1, 3, 3), 2))),
    ("conv2d fwd 16x8x31x31 k3 s2",
     lambda: ("conv2d_forward",
              (np.random.rand(16, 8, 31, 31), np.random.rand(16, 8, 3, 3), 2))),
    ("conv2d dW  16x1x64x64 k3 s2",
     lambda: ("conv2d_backward_weight",
              (np.random.rand(16, 1, 64, 64),
               np.random.rand(16, 8, 31, 31), 3, 3, 2))),
    ("conv2d dX  16x8x31x31 k3 s2",
     lambda: ("conv2d_backward_input",
              (np.random.rand(16, 16, 15, 15),
               np.random.rand(16, 8, 3, 3), 31, 31, 2))),
    ("conv1d fwd 16x34x48 k5",
     lambda: ("conv1d_forward",
              (np.random.rand(16, 34, 48), np.random.rand(64, 34, 5), 1))),
    ("conv1d dW  16x34x48 k5",
     lambda: ("conv1d_backward_weight",
              (np.random.rand(16, 34, 48), np.random.rand(16, 64, 44), 5, 1))),
    ("conv1d dX  16x64x44 k5",
     lambda: ("conv1d_backward_input",
              (np.random.rand(16, 64, 44), np.random.rand(64, 34, 5), 48, 1))),
]


def time_call(fn, args, repeats):
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        out = fn(*args)
    return (time.perf_counter() - start) / repeats, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    numpy_mod = get_backend("numpy")
    cython_mod = get_backend("cython") if HAVE_CYTHON else None
    if cython_mod is None:
        print("compiled extension not available; timing numpy only")

    header = f"{'case':34} {'numpy':>10} {'cython':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    np.random.seed(0)
    for name, build in CASES:
        fn_name, call_args = build()
        t_np, ref = time_call(getattr(numpy_mod, fn_name), call_args,
                              args.repeats)
        if cython_mod is None:
            print(f"{name:34} {t_np * 1e3:9.2f}ms {'-':>10} {'-':>8}")
            continue
        t_cy, out = time_call(getattr(cython_mod, fn_name), call_args,
                              args.repeats)
        err = float(np.max(np.abs(out - ref)))
        if err > 1e-9:
            raise AssertionError(f"{name}: backends disagree, max err {err}")
        print(f"{name:34} {t_np * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms "
              f"{t_np / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
