"""Time the numba kernels against the pure-numpy fallback.

Shapes follow the default model's first layers on a 176x208 image. Each
kernel is called once to trigger compilation, outputs are compared, then the
best of ``--repeat`` runs is reported.

    python3 benchmarks/bench_kernels.py --batch 8 --repeat 5
"""

import argparse
import math
import time

import numpy as np

from mricnn.kernels import _numba, _numpy, set_threads


def cases(batch, g):
    xp = g.normal(size=(batch, 1, 178, 210)).astype(np.float32)
    w = g.normal(size=(16, 1, 3, 3)).astype(np.float32)
    dy = g.normal(size=(batch, 16, 176, 208)).astype(np.float32)
    dxp = g.normal(size=(batch, 16, 90, 106)).astype(np.float32)
    dw = g.normal(size=(16, 3, 3)).astype(np.float32)
    ddy = g.normal(size=(batch, 16, 88, 104)).astype(np.float32)
    pool = g.normal(size=(batch, 32, 88, 104)).astype(np.float32)
    img = g.uniform(0, 255, size=(176, 208))
    theta = math.radians(30)
    c, s = math.cos(theta), math.sin(theta)
    inv = np.array([[c, -s, 0.0], [s, c, 0.0]])
    return {
        "conv2d_forward": ("conv2d_forward", (xp, w, 1)),
        "conv2d_backward_input": ("conv2d_backward_input", (dy, w, xp.shape, 1)),
        "conv2d_backward_weight": ("conv2d_backward_weight", (dy, xp, 3, 3, 1)),
        "depthwise_forward": ("depthwise_forward", (dxp, dw, 1)),
        "depthwise_backward_input": ("depthwise_backward_input", (ddy, dw, dxp.shape, 1)),
        "depthwise_backward_weight": ("depthwise_backward_weight", (ddy, dxp, 3, 3, 1)),
        "maxpool_forward": ("maxpool_forward", (pool, 2, 2)),
        "warp_bilinear": ("warp_bilinear", (img, inv, 0.0)),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return min(times)


def max_abs_diff(a, b):
    if isinstance(a, tuple):
        return max(max_abs_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=8)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    if args.threads:
        set_threads(args.threads)
    g = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}{'max diff':>11}")
    for label, (name, kargs) in cases(args.batch, g).items():
        fast, slow = getattr(_numba, name), getattr(_numpy, name)
        diff = max_abs_diff(fast(*kargs), slow(*kargs))  # also compiles the numba kernel
        t_np = best_of(slow, kargs, args.repeat)
        t_nb = best_of(fast, kargs, args.repeat)
        print(f"{label:<28}{t_np * 1e3:>10.2f}{t_nb * 1e3:>10.2f}{t_np / t_nb:>8.1f}x{diff:>11.2e}")


if __name__ == "__main__":
    main()
