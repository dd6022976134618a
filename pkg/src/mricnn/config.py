"""Network/run configuration and its JSON schema.

A config file is one flat JSON object. ``blocks`` is a list of blocks, each a
list of layer objects; ``head`` lists the fully connected layers after the
flatten, the last of which produces the class logits. Flags given on the
command line override file values.
"""

import copy
import json
from dataclasses import asdict, dataclass, field, fields

import jsonschema

from .errors import ConfigurationError

_KERNEL = {
    "oneOf": [
        {"type": "integer", "minimum": 1},
        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
    ]
}
_CONV = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type", "filters"],
    "properties": {
        "type": {"enum": ["conv2d", "separable_conv2d"]},
        "filters": {"type": "integer", "minimum": 1},
        "kernel": _KERNEL,
        "stride": {"type": "integer", "minimum": 1},
        "padding": {"enum": ["same", "valid"]},
    },
}
_POOL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"const": "maxpool"},
        "size": {"type": "integer", "minimum": 1},
        "stride": {"type": "integer", "minimum": 1},
    },
}
_PLAIN = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {"type": {"enum": ["batchnorm", "relu"]}},
}
_DENSE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["units"],
    "properties": {
        "units": {"type": "integer", "minimum": 1},
        "batchnorm": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "mricnn run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "input_shape": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 3,
            "maxItems": 3,
            "description": "channels, height, width",
        },
        "num_classes": {"type": "integer", "minimum": 2},
        "blocks": {
            "type": "array",
            "items": {"type": "array", "items": {"oneOf": [_CONV, _POOL, _PLAIN]}},
        },
        "head": {"type": "array", "items": _DENSE, "minItems": 1},
        "strict": {
            "type": "boolean",
            "description": "enforce five blocks, one pool per block, four dense layers ending in 4 units",
        },
        "dtype": {"enum": ["float32", "float64"]},
        "bn_momentum": {"type": "number", "minimum": 0, "maximum": 1},
        "bn_epsilon": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "lr": {"type": "number", "exclusiveMinimum": 0},
        "batch_size": {"type": "integer", "minimum": 1},
        "epochs": {"type": "integer", "minimum": 0},
    },
}


def conv(filters, kernel=3, kind="conv2d", stride=1, padding="same"):
    return {"type": kind, "filters": filters, "kernel": kernel, "stride": stride, "padding": padding}


def sepconv(filters, kernel=3, stride=1, padding="same"):
    return conv(filters, kernel, "separable_conv2d", stride, padding)


RELU = {"type": "relu"}
BATCHNORM = {"type": "batchnorm"}
MAXPOOL = {"type": "maxpool", "size": 2, "stride": 2}


def reference_blocks(stem=16, widths=(32, 64, 128, 256), kernel=3):
    """Conv stem block followed by separable blocks with batch norm."""
    blocks = [[conv(stem, kernel), RELU, conv(stem, kernel), RELU, MAXPOOL]]
    for c in widths:
        blocks.append([sepconv(c, kernel), RELU, sepconv(c, kernel), RELU, BATCHNORM, MAXPOOL])
    return copy.deepcopy(blocks)


@dataclass
class ModelConfig:
    input_shape: tuple = (1, 176, 208)
    num_classes: int = 4
    blocks: list = field(default_factory=reference_blocks)
    head: list = field(default_factory=lambda: [{"units": u} for u in (512, 128, 64, 4)])
    strict: bool = True
    dtype: str = "float32"
    bn_momentum: float = 0.01
    bn_epsilon: float = 1e-5
    seed: int = 0
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 20

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        self.blocks = [[_normalize_layer(dict(layer)) for layer in block] for block in self.blocks]
        self.head = [{"units": int(h["units"]), "batchnorm": bool(h.get("batchnorm", False))} for h in self.head]

    # -- (de)serialization ------------------------------------------------
    @classmethod
    def from_dict(cls, data, **overrides):
        validate_dict(data)
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        validate_dict(merged)
        return cls(**merged)

    @classmethod
    def from_json(cls, path, **overrides):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data, **overrides)

    def to_dict(self):
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return ModelConfig(**d)


def _normalize_layer(layer):
    kind = layer["type"]
    if kind in ("conv2d", "separable_conv2d"):
        k = layer.get("kernel", 3)
        k = [int(k), int(k)] if isinstance(k, int) else [int(k[0]), int(k[1])]
        return {
            "type": kind,
            "filters": int(layer["filters"]),
            "kernel": k,
            "stride": int(layer.get("stride", 1)),
            "padding": layer.get("padding", "same"),
        }
    if kind == "maxpool":
        return {"type": kind, "size": int(layer.get("size", 2)), "stride": int(layer.get("stride", 2))}
    if kind in ("batchnorm", "relu"):
        return {"type": kind}
    raise ConfigurationError(f"unknown layer type {kind!r}")


def validate_dict(data):
    """Check ``data`` against :data:`CONFIG_SCHEMA`; unknown keys are rejected."""
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config error at {where}: {exc.message}") from None


def default_config(**changes):
    """The reference architecture at the full 176x208 input size."""
    return ModelConfig().replace(**changes) if changes else ModelConfig()


def synthetic_config(**changes):
    """A narrow five-block variant for 44x52 inputs, used for quick training runs."""
    cfg = ModelConfig(
        input_shape=(1, 44, 52),
        blocks=reference_blocks(stem=8, widths=(16, 16, 32, 32)),
        head=[{"units": u} for u in (64, 32, 16, 4)],
        batch_size=8,
        lr=2e-3,
        seed=0,
    )
    return cfg.replace(**changes) if changes else cfg


CONFIG_KEYS = tuple(f.name for f in fields(ModelConfig))
