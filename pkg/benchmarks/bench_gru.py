"""Timing comparison of the GRU sequence kernels (numpy vs compiled).

Runs forward and forward+backward passes over a few representative walk
shapes and prints per-call times plus the speedup of the compiled kernel.

    python3 benchmarks/bench_gru.py [--repeats N]
"""

import argparse
import time

import numpy as np

from meshwalk.nn import backend


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_shape(kernel, steps, walks, hidden, repeats, rng):
    xp = rng.normal(size=(steps, walks, 3 * hidden))
    u = rng.normal(size=(hidden, 3 * hidden)) * 0.1
    h0 = np.zeros((walks, hidden))
    fwd = time_call(lambda: kernel.gru_seq_forward(xp, u, h0), repeats)

    out = kernel.gru_seq_forward(xp, u, h0)
    dh = rng.normal(size=(steps, walks, hidden))

    def both():
        res = kernel.gru_seq_forward(xp, u, h0)
        kernel.gru_seq_backward(dh, u, h0, *res)

    fwd_bwd = time_call(both, repeats)
    del out
    return fwd, fwd_bwd


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per shape (best is kept)")
    args = parser.parse_args()

    names = backend.available_backends()
    print(f"available backends: {', '.join(names)}")
    if "cython" not in names:
        print("compiled kernel not built; timing the numpy fallback only")

    shapes = [
        (64, 8, 64),      # tiny config, one training batch
        (64, 32, 64),
        (100, 8, 512),    # full-size final GRU
        (100, 8, 1024),   # full-size first GRU
    ]
    rng = np.random.default_rng(0)

    header = (f"{'steps':>6} {'walks':>6} {'hidden':>7} "
              + "".join(f"{name + ' fwd':>14}{name + ' f+b':>14}"
                        for name in names)
              + (f"{'speedup f+b':>13}" if len(names) > 1 else ""))
    print(header)
    for steps, walks, hidden in shapes:
        row = f"{steps:>6} {walks:>6} {hidden:>7} "
        times = {}
        for name in names:
            kernel = backend.get_backend(name)
            fwd, fwd_bwd = bench_shape(kernel, steps, walks, hidden,
                                       args.repeats, rng)
            times[name] = (fwd, fwd_bwd)
            row += f"{fwd * 1e3:>11.2f} ms{fwd_bwd * 1e3:>11.2f} ms"
        if len(names) > 1:
            ratio = times["numpy"][1] / times["cython"][1]
            row += f"{ratio:>12.1f}x"
        print(row)


if __name__ == "__main__":
    main()
