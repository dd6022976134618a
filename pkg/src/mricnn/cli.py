"""Command-line entry point: ``mricnn <command> [options]``.

Exit codes: 0 success, 1 I/O or file-format failure, 2 configuration or
validation error, 3 numeric failure during training.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import augment as aug
from . import kernels, synthetic
from .checkpoint import load_checkpoint, save_checkpoint
from .config import CONFIG_SCHEMA, ModelConfig, default_config
from .dataset import (
    CLASS_NAMES,
    ImageSample,
    load_directory,
    read_manifest,
    resize,
    resize_samples,
    split,
    stack_pixels,
    write_manifest,
)
from .errors import ConfigurationError, MriCnnError
from .imageio import read_image, write_pgm
from .network import count_parameters, layer_counts
from .training import evaluate, export_metrics, predict, build_model, train

log = logging.getLogger("mricnn")


def _claim(paths, force):
    """Refuse to overwrite existing outputs unless ``force``."""
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise ConfigurationError(f"refusing to overwrite {', '.join(existing)} (pass --force)")


def _claim_dir(out, force):
    out = Path(out)
    if out.exists() and any(out.iterdir()) and not force:
        raise ConfigurationError(f"output directory {out} is not empty (pass --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(data):
    skipped = []
    samples = load_directory(data, skipped)
    for path, reason in skipped:
        print(f"skipped {path}: {reason}", file=sys.stderr)
    if not samples:
        raise ConfigurationError(f"no readable images under {data}")
    return samples


def _load_config(args):
    overrides = {
        "epochs": getattr(args, "epochs", None),
        "seed": getattr(args, "seed", None),
        "batch_size": getattr(args, "batch_size", None),
        "lr": getattr(args, "lr", None),
    }
    if getattr(args, "config", None):
        return ModelConfig.from_json(args.config, **overrides)
    return ModelConfig.from_dict(default_config().to_dict(), **overrides)


def _image_size(cfg):
    if cfg.input_shape[0] != 1:
        raise ConfigurationError(f"images are single-channel; config input has {cfg.input_shape[0]} channels")
    return cfg.input_shape[1], cfg.input_shape[2]


def _fmt_probs(p):
    return " ".join(f"{v:.6f}" for v in p)


# -- commands ----------------------------------------------------------------


def cmd_make_synthetic(args):
    out = _claim_dir(args.out, args.force)
    paths = synthetic.write_dataset(out, args.per_class, tuple(args.size), args.seed)
    print(f"wrote {len(paths)} images to {out}")
    return 0


def cmd_prepare(args):
    samples = _load(args.data)
    out = _claim_dir(args.out, args.force)
    parts = split(samples, seed=args.seed)
    rows = {}
    for name, part in parts.items():
        rows[name] = []
        for s in resize_samples(part, tuple(args.size)):
            dest = out / name / CLASS_NAMES[s.label] / (Path(s.source_path).stem + ".pgm")
            dest.parent.mkdir(parents=True, exist_ok=True)
            write_pgm(dest, s.pixels)
            rows[name].append(ImageSample(s.pixels, s.label, s.provenance, str(dest)))
    write_manifest(rows, out / "split.csv")
    print(" ".join(f"{name}={len(part)}" for name, part in parts.items()))
    return 0


def cmd_augment(args):
    plan = aug.AugmentPlan.parse(args.transforms, seed=args.seed)
    samples = _load(args.data)
    out = _claim_dir(args.out, args.force)
    skipped = []
    result = aug.augment_dataset(samples, plan, skipped)
    for path, reason in skipped:
        print(f"skipped {path}: {reason}", file=sys.stderr)
    with open(out / "manifest.csv", "w") as fh:
        fh.write("path,label,source,transform\n")
        for s in result:
            src = s.source_path.split("#")[0]
            stem = Path(src).stem
            fname = f"{stem}.pgm" if s.provenance == "original" else f"{stem}__{s.provenance}.pgm"
            dest = out / CLASS_NAMES[s.label] / fname
            dest.parent.mkdir(parents=True, exist_ok=True)
            write_pgm(dest, s.pixels)
            fh.write(f"{dest.relative_to(out)},{s.label},{src},{s.provenance}\n")
    print(f"in={len(samples)} out={len(result)}")
    return 0


def cmd_train(args):
    cfg = _load_config(args)
    size = _image_size(cfg)
    out = Path(args.out)
    targets = [out / n for n in ("metrics.csv", "best.ckpt", "last.ckpt", "split.csv")]
    _claim(targets, args.force)
    samples = _load(args.data)
    plan = aug.AugmentPlan.parse(args.augment, seed=cfg.seed) if args.augment else None
    if plan is not None and not args.split_first:
        samples = aug.augment_dataset(samples, plan)
    parts = split(samples, seed=cfg.seed)
    if plan is not None and args.split_first:
        parts = type(parts)(aug.augment_dataset(parts.train, plan), parts.validation, parts.test, parts.seed)
    parts = type(parts)(*(resize_samples(p, size) for p in (parts.train, parts.validation, parts.test)), parts.seed)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(dict(parts.items()), out / "split.csv")

    state = build_model(cfg)
    state, metrics = train(state, parts, epochs=cfg.epochs, batch_size=cfg.batch_size)
    export_metrics(metrics, out / "metrics.csv")
    save_checkpoint(state, out / "last.ckpt")
    save_checkpoint(state.best if state.best is not None else state, out / "best.ckpt")
    final_train = evaluate(state, parts.train).accuracy
    final_val = evaluate(state, parts.validation).accuracy if parts.validation else float("nan")
    print(f"epochs={state.epoch} train_acc={final_train:.6f} val_acc={final_val:.6f}")
    return 0


def _manifest_samples(manifest, which, size):
    samples = []
    for path, label, part in read_manifest(manifest):
        if which != "all" and part != which:
            continue
        if "#" in path:
            log.warning("skipping in-memory augmented entry %s", path)
            continue
        samples.append(ImageSample(read_image(path), label, "original", path))
    return resize_samples(samples, size)


def cmd_evaluate(args):
    state = load_checkpoint(args.checkpoint)
    size = _image_size(state.config)
    if args.manifest:
        samples = _manifest_samples(args.manifest, args.split, size)
    else:
        samples = resize_samples(_load(args.data), size)
    if not samples:
        raise ConfigurationError("no samples to evaluate")
    result = evaluate(state, samples)
    print(f"samples={len(samples)} loss={result.loss:.6f} accuracy={result.accuracy:.6f}")
    print("confusion (rows=true, cols=predicted): " + ", ".join(CLASS_NAMES))
    for name, row in zip(CLASS_NAMES, result.confusion):
        print(f"{name:>12} " + " ".join(f"{v:5d}" for v in row))
    return 0


def cmd_predict(args):
    state = load_checkpoint(args.checkpoint)
    size = _image_size(state.config)
    images = [ImageSample(resize(read_image(p), size), 0, "original", str(p)) for p in args.images]
    probs = predict(state, stack_pixels(images))
    for s, p in zip(images, probs):
        print(f"{s.source_path} {CLASS_NAMES[int(np.argmax(p))]} {_fmt_probs(p)}")
    return 0


def cmd_inspect(args):
    if args.checkpoint:
        cfg = load_checkpoint(args.checkpoint).config
    elif args.config:
        cfg = ModelConfig.from_json(args.config)
    else:
        cfg = default_config()
    print(f"{'layer':<28} {'kind':<36} {'output':<16} {'trainable':>10} {'non-trainable':>14}")
    for row in layer_counts(cfg):
        shape = "x".join(str(d) for d in row.out_shape)
        print(f"{row.name:<28} {row.description:<36} {shape:<16} {row.trainable:>10} {row.non_trainable:>14}")
    total, trainable, non_trainable = count_parameters(cfg)
    print(f"total={total} trainable={trainable} non_trainable={non_trainable}")
    return 0


def cmd_schema(args):
    print(json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True))
    return 0


# -- parser ------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="cap on kernel threads (results do not depend on it)")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mricnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-synthetic", parents=[common], help="write the four-class pattern dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--size", type=int, nargs=2, default=list(synthetic.SYNTH_SIZE), metavar=("H", "W"))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_synthetic)

    p = sub.add_parser("prepare", parents=[common], help="split 6:2:2, resize and write a split manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, nargs=2, default=[176, 208], metavar=("H", "W"))
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("augment", parents=[common], help="write originals plus augmented copies as PGM")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--transforms", default="all", help=f"comma list from: {', '.join(aug.TRANSFORMS)}; or all/none")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", parents=[common], help="train and write metrics.csv, best.ckpt, last.ckpt, split.csv")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--augment", help="augment in memory with these transforms before splitting")
    p.add_argument("--split-first", action="store_true", help="augment only the training split (departs from the reference protocol)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="loss, accuracy and confusion matrix")
    p.add_argument("--checkpoint", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data")
    src.add_argument("--manifest")
    p.add_argument("--split", default="test", choices=["train", "validation", "test", "all"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="class and probabilities per image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inspect", parents=[common], help="per-layer parameter counts")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--config")
    g.add_argument("--checkpoint")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("schema", parents=[common], help="print the config JSON schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.threads is not None:
            kernels.set_threads(args.threads)
        return args.func(args)
    except MriCnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
