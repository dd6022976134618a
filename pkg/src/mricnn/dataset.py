"""Loading class-labelled image folders, resizing, splitting and batching."""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError, ContractError, FormatError
from .imageio import SUPPORTED_SUFFIXES, read_image

log = logging.getLogger(__name__)

CLASS_NAMES = ("non_demented", "very_mild", "mild", "moderate")
NUM_CLASSES = len(CLASS_NAMES)
TARGET_SIZE = (176, 208)
SPLIT_RATIO = (6, 2, 2)
DEFAULT_BATCH_SIZE = 32


@dataclass(frozen=True)
class ImageSample:
    pixels: np.ndarray
    label: int
    provenance: str = "original"
    source_path: str = ""

    def __post_init__(self):
        if not 0 <= self.label < NUM_CLASSES:
            raise ContractError(f"label {self.label} outside 0..{NUM_CLASSES - 1}")


@dataclass(frozen=True)
class SplitDataset:
    train: list
    validation: list
    test: list
    seed: int

    def items(self):
        return (("train", self.train), ("validation", self.validation), ("test", self.test))


def load_directory(root, skipped=None):
    """Load ``root/<class>/*.{pgm,png}`` for the four class folders.

    Samples come back grouped by label, each group in lexicographic path
    order. Files that fail to decode
    are logged and, if ``skipped`` is a list, recorded there as
    ``(path, reason)``.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigurationError(f"data directory {root} does not exist")
    found = sorted(p.name for p in root.iterdir() if p.is_dir())
    missing = [name for name in CLASS_NAMES if name not in found]
    if missing:
        raise ConfigurationError(
            f"missing class director{'y' if len(missing) == 1 else 'ies'} {', '.join(missing)} in {root}; "
            f"found: {', '.join(found) or 'nothing'}"
        )
    samples = []
    for label, name in enumerate(CLASS_NAMES):
        for path in sorted((root / name).iterdir()):
            if not path.is_file() or path.suffix.lower() not in SUPPORTED_SUFFIXES:
                continue
            try:
                pixels = read_image(path)
            except (FormatError, OSError) as exc:
                log.warning("skipping %s: %s", path, exc)
                if skipped is not None:
                    skipped.append((str(path), str(exc)))
                continue
            samples.append(ImageSample(pixels, label, "original", str(path)))
    return samples


def _axis_weights(n_in, n_out):
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize(img, target=TARGET_SIZE):
    """Bilinear resample to ``target = (height, width)`` with half-pixel centres."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 1:
        raise ValueError(f"cannot resize image of shape {img.shape}")
    th, tw = target
    if img.shape == (th, tw):
        return img.copy()
    lo, hi, f = _axis_weights(img.shape[0], th)
    rows = img[lo, :] * (1.0 - f)[:, None] + img[hi, :] * f[:, None]
    lo, hi, f = _axis_weights(img.shape[1], tw)
    return rows[:, lo] * (1.0 - f)[None, :] + rows[:, hi] * f[None, :]


def resize_samples(samples, target=TARGET_SIZE):
    return [
        s if s.pixels.shape == tuple(target) else ImageSample(resize(s.pixels, target), s.label, s.provenance, s.source_path)
        for s in samples
    ]


def split(samples, ratio=SPLIT_RATIO, seed=0, num_classes=NUM_CLASSES):
    """Stratified train/validation/test split.

    Within each class the samples are shuffled with ``seed``; the test and
    validation parts get ``floor(n * r / sum(ratio))`` samples each and the
    rest goes to training. Each part keeps the input order.
    """
    total = sum(ratio)
    by_class = {c: [] for c in range(num_classes)}
    for i, s in enumerate(samples):
        if s.label >= num_classes:
            raise ContractError(f"label {s.label} outside 0..{num_classes - 1}")
        by_class[s.label].append(i)
    empty = [CLASS_NAMES[c] if c < NUM_CLASSES else str(c) for c, idx in by_class.items() if not idx]
    if empty:
        raise ConfigurationError(f"class {empty[0]} has no samples; every class needs at least one")
    parts = {"train": [], "validation": [], "test": []}
    for c, idx in by_class.items():
        n = len(idx)
        order = _rng.stream(seed, "split", c).permutation(n)
        shuffled = [idx[k] for k in order]
        n_test = (n * ratio[2]) // total
        n_val = (n * ratio[1]) // total
        parts["test"].extend(shuffled[:n_test])
        parts["validation"].extend(shuffled[n_test : n_test + n_val])
        parts["train"].extend(shuffled[n_test + n_val :])
    pick = {k: [samples[i] for i in sorted(v)] for k, v in parts.items()}
    return SplitDataset(pick["train"], pick["validation"], pick["test"], seed)


def one_hot(labels, num_classes=NUM_CLASSES, dtype=np.float32):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        bad = labels[(labels < 0) | (labels >= num_classes)][0]
        raise ContractError(f"label {bad} outside 0..{num_classes - 1}")
    out = np.zeros((labels.size, num_classes), dtype=dtype)
    out[np.arange(labels.size), labels] = 1
    return out


def stack_pixels(samples, dtype=np.float32):
    """``(N, 1, H, W)`` array of pixels scaled from [0, 255] to [0, 1]."""
    shapes = {s.pixels.shape for s in samples}
    if len(shapes) > 1:
        raise ContractError(f"samples have mixed image shapes {sorted(shapes)}; resize first")
    return (np.stack([s.pixels for s in samples])[:, None, :, :] / 255.0).astype(dtype)


def to_batches(samples, batch_size=DEFAULT_BATCH_SIZE, seed=None, epoch=0, num_classes=NUM_CLASSES, dtype=np.float32):
    """Yield ``(x, y)`` batches; the last batch may be short.

    With a ``seed`` the order is a permutation drawn for ``(seed, epoch)``;
    without one the input order is kept.
    """
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    order = np.arange(len(samples))
    if seed is not None:
        order = _rng.stream(seed, "shuffle", epoch).permutation(len(samples))
    for start in range(0, len(samples), batch_size):
        chunk = [samples[i] for i in order[start : start + batch_size]]
        yield stack_pixels(chunk, dtype), one_hot([s.label for s in chunk], num_classes, dtype)


def write_manifest(splits, path):
    """CSV with header ``path,label,split``, one row per sample."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "label", "split"])
        for name, part in splits.items():
            for s in part:
                writer.writerow([s.source_path, s.label, name])


def read_manifest(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["path", "label", "split"]:
            raise ConfigurationError(f"{path} is not a split manifest (header {reader.fieldnames})")
        return [(row["path"], int(row["label"]), row["split"]) for row in reader]
