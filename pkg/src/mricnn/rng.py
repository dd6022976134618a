"""Seeded random streams.

Every random draw in the pipeline comes from a PCG64 generator whose seed is
derived from one master seed plus a purpose tag (and optional integer
coordinates such as epoch or image index) through ``numpy.random.SeedSequence``.
Streams for different purposes never share state, and a stream can be
re-created at any time from its coordinates alone, so parallel work or
resumed runs draw the same numbers.
"""

import numpy as np

WEIGHTS = 1
AUGMENT = 2
SHUFFLE = 3
SPLIT = 4
SYNTHETIC = 5
TENSOR = 6

_PURPOSES = {
    "weights": WEIGHTS,
    "augment": AUGMENT,
    "shuffle": SHUFFLE,
    "split": SPLIT,
    "synthetic": SYNTHETIC,
    "tensor": TENSOR,
}


def stream(seed, purpose, *coords):
    """Return a fresh ``numpy.random.Generator`` for ``(seed, purpose, *coords)``."""
    if isinstance(purpose, str):
        purpose = _PURPOSES[purpose]
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = (int(purpose),) + tuple(int(c) for c in coords)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))
