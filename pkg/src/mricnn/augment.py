"""Label-preserving image transforms and dataset expansion.

Images are float arrays of shape ``(H, W)`` with values in ``[0, 255]``;
every transform returns a new array of the same shape, clamped to that
range. Randomness comes from a per-image stream keyed by
``(seed, image index, transform)``, so the result for one image does not
depend on which other images are processed or in what order.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from . import rng as _rng
from .errors import ConfigurationError, ParameterError

log = logging.getLogger(__name__)

TRANSFORMS = ("rotate_ccw", "rotate_cw", "hflip", "vflip", "blur", "noise")
_CODES = {name: i + 1 for i, name in enumerate(TRANSFORMS)}

DEFAULT_PARAMS = {
    "rotate_ccw": {"max_angle": 180.0},
    "rotate_cw": {"max_angle": 180.0},
    "blur": {"sigma": 1.0},
    "noise": {"kind": "random", "amplitude": 0.05},
}


def _clamp(img):
    return np.clip(img, 0.0, 255.0)


def _as_image(img):
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError(f"expected a non-empty 2-d image, got shape {arr.shape}")
    return arr


def rotate(img, direction="ccw", angle_deg=None, rng=None):
    """Rotate about the image centre by ``angle_deg`` degrees in ``[0, 180]``.

    With ``angle_deg=None`` the angle is drawn uniformly from ``[0, 180]``
    using ``rng``. Bilinear sampling; pixels mapped from outside the source
    become 0. Directions are as seen on screen (row 0 at the top).
    """
    img = _as_image(img)
    if direction not in ("ccw", "cw"):
        raise ParameterError(f"rotation direction must be 'cw' or 'ccw', got {direction!r}")
    if angle_deg is None:
        if rng is None:
            raise ParameterError("a random rotation needs an rng")
        angle_deg = rng.uniform(0.0, 180.0)
    if not 0.0 <= angle_deg <= 180.0:
        raise ParameterError(f"rotation angle must lie in [0, 180], got {angle_deg}")
    theta = math.radians(angle_deg if direction == "ccw" else -angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    h, w = img.shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    # output pixel -> source pixel
    inv = np.array(
        [
            [c, -s, cx - c * cx + s * cy],
            [s, c, cy - s * cx - c * cy],
        ]
    )
    return _clamp(kernels.warp_bilinear(img, inv, 0.0))


def flip(img, axis="horizontal"):
    """Mirror left-right (``horizontal``) or top-bottom (``vertical``)."""
    img = _as_image(img)
    if axis == "horizontal":
        return img[:, ::-1].copy()
    if axis == "vertical":
        return img[::-1, :].copy()
    raise ParameterError(f"flip axis must be 'horizontal' or 'vertical', got {axis!r}")


def gaussian_kernel(sigma):
    radius = math.ceil(3.0 * sigma)
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return g / g.sum()


def _blur_axis(img, kernel, axis):
    radius = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(img, pad, mode="symmetric")
    n = img.shape[axis]
    # accumulate w_k * (x_{i+k} - x_i): a constant row passes through unchanged
    out = img.copy()
    for k, wk in enumerate(kernel):
        if k == radius:
            continue
        shifted = padded[k : k + n, :] if axis == 0 else padded[:, k : k + n]
        out += wk * (shifted - img)
    return out


def gaussian_blur(img, sigma=1.0):
    """Separable Gaussian blur with radius ``ceil(3 sigma)`` and mirrored borders."""
    img = _as_image(img)
    if not sigma > 0:
        raise ParameterError(f"blur sigma must be positive, got {sigma}")
    kernel = gaussian_kernel(sigma)
    return _clamp(_blur_axis(_blur_axis(img, kernel, 1), kernel, 0))


def add_noise(img, kind="gaussian", amplitude=0.05, rng=None):
    """Add zero-mean noise scaled to ``amplitude`` of the 0..255 range.

    ``gaussian`` uses standard deviation ``amplitude * 255``; ``uniform``
    draws from ``[-amplitude * 255, amplitude * 255]``; ``random`` picks one
    of the two with equal probability.
    """
    img = _as_image(img)
    if amplitude < 0:
        raise ParameterError(f"noise amplitude must be >= 0, got {amplitude}")
    if amplitude == 0:
        return img.copy()
    if rng is None:
        raise ParameterError("noise needs an rng")
    if kind == "random":
        kind = "gaussian" if rng.random() < 0.5 else "uniform"
    scale = amplitude * 255.0
    if kind == "gaussian":
        noise = rng.normal(0.0, scale, size=img.shape)
    elif kind == "uniform":
        noise = rng.uniform(-scale, scale, size=img.shape)
    else:
        raise ParameterError(f"noise kind must be gaussian, uniform or random, got {kind!r}")
    return _clamp(img + noise)


@dataclass(frozen=True)
class AugmentPlan:
    transforms: tuple = TRANSFORMS
    params: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_PARAMS.items()})
    seed: int = 0

    def __post_init__(self):
        transforms = tuple(self.transforms)
        unknown = [t for t in transforms if t not in _CODES]
        if unknown:
            raise ConfigurationError(f"unknown transform {unknown[0]!r}; choose from {', '.join(TRANSFORMS)}")
        dupes = sorted({t for t in transforms if transforms.count(t) > 1})
        if dupes:
            raise ConfigurationError(f"transform {dupes[0]!r} listed more than once")
        object.__setattr__(self, "transforms", transforms)

    @classmethod
    def parse(cls, text, seed=0):
        """Build a plan from a comma-separated list; ``all`` enables every transform."""
        text = text.strip()
        if text in ("", "none"):
            return cls(transforms=(), seed=seed)
        if text == "all":
            return cls(seed=seed)
        return cls(transforms=tuple(t.strip() for t in text.split(",")), seed=seed)

    def with_seed(self, seed):
        return replace(self, seed=seed)


def apply_transform(img, name, plan, index):
    """Apply transform ``name`` to the image at dataset position ``index``."""
    gen = _rng.stream(plan.seed, "augment", index, _CODES[name])
    p = {**DEFAULT_PARAMS.get(name, {}), **plan.params.get(name, {})}
    if name == "rotate_ccw":
        return rotate(img, "ccw", gen.uniform(0.0, p["max_angle"]))
    if name == "rotate_cw":
        return rotate(img, "cw", gen.uniform(0.0, p["max_angle"]))
    if name == "hflip":
        return flip(img, "horizontal")
    if name == "vflip":
        return flip(img, "vertical")
    if name == "blur":
        return gaussian_blur(img, p["sigma"])
    return add_noise(img, p["kind"], p["amplitude"], gen)


def augment_dataset(samples, plan, skipped=None):
    """Return originals plus one transformed copy per enabled transform.

    Output order is each original followed by its copies in plan order, so
    ``len(out) == len(samples) * (1 + len(plan.transforms))`` when nothing
    fails. A sample whose pixels cannot be transformed is dropped with its
    copies and recorded as ``(source_path, reason)`` in ``skipped``.
    """
    if not samples:
        raise ConfigurationError("cannot augment an empty dataset")
    out = []
    for index, sample in enumerate(samples):
        try:
            copies = [
                replace(
                    sample,
                    pixels=apply_transform(sample.pixels, name, plan, index),
                    provenance=name,
                    source_path=f"{sample.source_path}#{name}",
                )
                for name in plan.transforms
            ]
        except (ParameterError, ValueError) as exc:
            log.warning("skipping %s: %s", sample.source_path, exc)
            if skipped is not None:
                skipped.append((sample.source_path, str(exc)))
            continue
        out.append(sample)
        out.extend(copies)
    return out
