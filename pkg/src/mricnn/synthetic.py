"""A small four-class pattern dataset that stands in for MRI slices in tests.

Class 0 has horizontal stripes, class 1 vertical stripes, class 2 a bright
disc, class 3 a checkerboard. Period, phase, position, contrast and additive
noise vary per image, all drawn from the seeded ``synthetic`` stream.
"""

from pathlib import Path

import numpy as np

from . import rng as _rng
from .dataset import CLASS_NAMES, ImageSample
from .imageio import write_pgm

SYNTH_SIZE = (44, 52)


def pattern(label, size, gen):
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    period = gen.uniform(6.0, 10.0)
    phase = gen.uniform(0.0, period)
    if label == 0:
        base = (np.mod(yy + phase, period) < period / 2).astype(np.float64)
    elif label == 1:
        base = (np.mod(xx + phase, period) < period / 2).astype(np.float64)
    elif label == 2:
        cy = gen.uniform(0.35, 0.65) * h
        cx = gen.uniform(0.35, 0.65) * w
        r = gen.uniform(0.2, 0.3) * min(h, w)
        base = ((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r).astype(np.float64)
    elif label == 3:
        base = ((np.floor((yy + phase) / (period / 2)) + np.floor((xx + phase) / (period / 2))) % 2).astype(np.float64)
    else:
        raise ValueError(f"no pattern for label {label}")
    low = gen.uniform(20.0, 70.0)
    high = gen.uniform(170.0, 230.0)
    img = low + (high - low) * base + gen.normal(0.0, 10.0, size=(h, w))
    return np.clip(np.rint(img), 0.0, 255.0)


def make_samples(n_per_class=50, size=SYNTH_SIZE, seed=0):
    samples = []
    for label, name in enumerate(CLASS_NAMES):
        for i in range(n_per_class):
            gen = _rng.stream(seed, "synthetic", label, i)
            samples.append(ImageSample(pattern(label, size, gen), label, "original", f"{name}/{i:04d}.pgm"))
    return samples


def write_dataset(root, n_per_class=50, size=SYNTH_SIZE, seed=0):
    """Write the pattern dataset as ``root/<class>/NNNN.pgm``; returns the paths."""
    root = Path(root)
    paths = []
    for s in make_samples(n_per_class, size, seed):
        path = root / s.source_path
        path.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(path, s.pixels)
        paths.append(path)
    return paths
