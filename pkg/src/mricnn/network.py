"""Layer graph built from a :class:`~mricnn.config.ModelConfig`.

The network is a flat sequence of layers. Parameters live outside the layer
objects, in dicts keyed ``"<layer name>.<param>"``, so the optimizer,
checkpoints and gradient checks can treat them uniformly.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from . import rng as _rng
from .config import ModelConfig
from .errors import ConfigurationError, ShapeError
from .tensor import DTYPES


class Layer:
    kind = ""
    trainable = ()  # parameter names updated by the optimizer
    buffers = ()  # non-trainable state (batch-norm running statistics)

    def __init__(self, name, in_shape):
        self.name = name
        self.in_shape = tuple(in_shape)
        self.out_shape = self.infer_shape(self.in_shape)

    def infer_shape(self, in_shape):
        return in_shape

    def param_shapes(self):
        return {}

    def buffer_shapes(self):
        return {}

    def init(self, gen, dtype):
        """Initial values for parameters and buffers, He-normal weights, zero biases."""
        return {}, {}

    def key(self, p):
        return f"{self.name}.{p}"

    def forward(self, params, buffers, x, mode, cfg):
        raise NotImplementedError

    def backward(self, params, dy, cache):
        raise NotImplementedError

    def describe(self):
        return self.kind


def _he(gen, shape, fan_in, dtype):
    return gen.normal(0.0, math.sqrt(2.0 / fan_in), size=shape).astype(dtype)


class Conv2D(Layer):
    kind = "conv2d"
    trainable = ("weight", "bias")

    def __init__(self, name, in_shape, spec):
        self.filters = spec["filters"]
        self.kh, self.kw = spec["kernel"]
        self.stride = spec["stride"]
        self.padding = spec["padding"]
        super().__init__(name, in_shape)

    def infer_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"{self.name}: needs a (C, H, W) input, got {in_shape}")
        c, h, w = in_shape
        _, _, ho = nn.padding_for(h, self.kh, self.stride, self.padding)
        _, _, wo = nn.padding_for(w, self.kw, self.stride, self.padding)
        return (self.filters, ho, wo)

    def param_shapes(self):
        c = self.in_shape[0]
        return {"weight": (self.filters, c, self.kh, self.kw), "bias": (self.filters,)}

    def init(self, gen, dtype):
        c = self.in_shape[0]
        w = _he(gen, self.param_shapes()["weight"], c * self.kh * self.kw, dtype)
        return {"weight": w, "bias": np.zeros(self.filters, dtype)}, {}

    def forward(self, params, buffers, x, mode, cfg):
        return nn.conv2d(x, params[self.key("weight")], params[self.key("bias")], self.stride, self.padding)

    def backward(self, params, dy, cache):
        dx, dw, db = nn.conv2d_backward(dy, cache)
        return dx, {self.key("weight"): dw, self.key("bias"): db}

    def describe(self):
        return f"conv2d {self.filters} {self.kh}x{self.kw}/{self.stride} {self.padding}"


class SeparableConv2D(Conv2D):
    kind = "separable_conv2d"
    trainable = ("depthwise", "pointwise", "bias")

    def param_shapes(self):
        c = self.in_shape[0]
        return {"depthwise": (c, self.kh, self.kw), "pointwise": (self.filters, c), "bias": (self.filters,)}

    def init(self, gen, dtype):
        c = self.in_shape[0]
        shapes = self.param_shapes()
        return {
            "depthwise": _he(gen, shapes["depthwise"], self.kh * self.kw, dtype),
            "pointwise": _he(gen, shapes["pointwise"], c, dtype),
            "bias": np.zeros(self.filters, dtype),
        }, {}

    def forward(self, params, buffers, x, mode, cfg):
        k = self.key
        return nn.separable_conv2d(x, params[k("depthwise")], params[k("pointwise")], params[k("bias")], self.stride, self.padding)

    def backward(self, params, dy, cache):
        dx, ddw, dpw, db = nn.separable_conv2d_backward(dy, cache)
        return dx, {self.key("depthwise"): ddw, self.key("pointwise"): dpw, self.key("bias"): db}

    def describe(self):
        return f"separable_conv2d {self.filters} {self.kh}x{self.kw}/{self.stride} {self.padding}"


class BatchNorm(Layer):
    kind = "batchnorm"
    trainable = ("gamma", "beta")
    buffers = ("running_mean", "running_var")

    @property
    def channels(self):
        return self.in_shape[0]

    def param_shapes(self):
        return {"gamma": (self.channels,), "beta": (self.channels,)}

    def buffer_shapes(self):
        return {"running_mean": (self.channels,), "running_var": (self.channels,)}

    def init(self, gen, dtype):
        c = self.channels
        return (
            {"gamma": np.ones(c, dtype), "beta": np.zeros(c, dtype)},
            {"running_mean": np.zeros(c, dtype), "running_var": np.ones(c, dtype)},
        )

    def forward(self, params, buffers, x, mode, cfg):
        k = self.key
        return nn.batchnorm(
            x,
            params[k("gamma")],
            params[k("beta")],
            buffers[k("running_mean")],
            buffers[k("running_var")],
            mode,
            cfg.bn_momentum,
            cfg.bn_epsilon,
        )

    def backward(self, params, dy, cache):
        dx, dg, db = nn.batchnorm_backward(dy, cache)
        return dx, {self.key("gamma"): dg, self.key("beta"): db}

    def describe(self):
        return f"batchnorm {self.channels}"


class MaxPool(Layer):
    kind = "maxpool"

    def __init__(self, name, in_shape, spec):
        self.size = spec["size"]
        self.stride = spec["stride"]
        super().__init__(name, in_shape)

    def infer_shape(self, in_shape):
        c, h, w = in_shape
        if h < self.size or w < self.size:
            raise ShapeError(f"{self.name}: pool window {self.size} larger than input {h}x{w}")
        return (c, (h - self.size) // self.stride + 1, (w - self.size) // self.stride + 1)

    def forward(self, params, buffers, x, mode, cfg):
        return nn.maxpool2d(x, self.size, self.stride)

    def backward(self, params, dy, cache):
        return nn.maxpool2d_backward(dy, cache), {}

    def describe(self):
        return f"maxpool {self.size}x{self.size}/{self.stride}"


class ReLU(Layer):
    kind = "relu"

    def forward(self, params, buffers, x, mode, cfg):
        return nn.relu(x)

    def backward(self, params, dy, cache):
        return nn.relu_backward(dy, cache), {}


class Flatten(Layer):
    kind = "flatten"

    def infer_shape(self, in_shape):
        return (math.prod(in_shape),)

    def forward(self, params, buffers, x, mode, cfg):
        return nn.flatten(x)

    def backward(self, params, dy, cache):
        return nn.flatten_backward(dy, cache), {}


class Dense(Layer):
    kind = "dense"
    trainable = ("weight", "bias")

    def __init__(self, name, in_shape, units):
        self.units = units
        super().__init__(name, in_shape)

    def infer_shape(self, in_shape):
        return (self.units,)

    def param_shapes(self):
        return {"weight": (self.units, self.in_shape[0]), "bias": (self.units,)}

    def init(self, gen, dtype):
        w = _he(gen, (self.units, self.in_shape[0]), self.in_shape[0], dtype)
        return {"weight": w, "bias": np.zeros(self.units, dtype)}, {}

    def forward(self, params, buffers, x, mode, cfg):
        return nn.dense(x, params[self.key("weight")], params[self.key("bias")])

    def backward(self, params, dy, cache):
        dx, dw, db = nn.dense_backward(dy, cache)
        return dx, {self.key("weight"): dw, self.key("bias"): db}

    def describe(self):
        return f"dense {self.units}"


def check_structure(cfg):
    """Raise :class:`ConfigurationError` if ``cfg`` breaks the strict layout rules."""
    if len(cfg.blocks) != 5:
        raise ConfigurationError(f"rule 'exactly 5 blocks' violated: config has {len(cfg.blocks)}")
    for i, block in enumerate(cfg.blocks, 1):
        pools = sum(1 for layer in block if layer["type"] == "maxpool")
        if pools != 1:
            raise ConfigurationError(f"rule 'one maxpool per block' violated: block {i} has {pools}")
    if len(cfg.head) != 4:
        raise ConfigurationError(f"rule 'exactly 4 dense layers' violated: head has {len(cfg.head)}")
    if cfg.num_classes != 4 or cfg.head[-1]["units"] != 4:
        raise ConfigurationError(
            f"rule 'final dense width 4' violated: num_classes={cfg.num_classes}, last units={cfg.head[-1]['units']}"
        )


class Network:
    def __init__(self, cfg):
        if not isinstance(cfg, ModelConfig):
            raise TypeError("Network needs a ModelConfig")
        if cfg.strict:
            check_structure(cfg)
        if not cfg.head or cfg.head[-1]["units"] != cfg.num_classes:
            raise ConfigurationError(
                f"rule 'last dense width equals num_classes' violated: {cfg.head[-1]['units'] if cfg.head else None} != {cfg.num_classes}"
            )
        if cfg.head[-1]["batchnorm"]:
            raise ConfigurationError("rule 'no batchnorm on the logits layer' violated")
        self.cfg = cfg
        self.dtype = np.dtype(DTYPES[cfg.dtype])
        self.layers = []
        shape = tuple(cfg.input_shape)
        try:
            for b, block in enumerate(cfg.blocks, 1):
                for i, spec in enumerate(block):
                    name = f"block{b}.{i}_{spec['type']}"
                    shape = self._add(_make_layer(name, shape, spec))
            shape = self._add(Flatten("flatten", shape))
            last = len(cfg.head) - 1
            for i, h in enumerate(cfg.head):
                shape = self._add(Dense(f"head.{i}_dense", shape, h["units"]))
                if i != last:
                    shape = self._add(ReLU(f"head.{i}_relu", shape))
                    if h["batchnorm"]:
                        shape = self._add(BatchNorm(f"head.{i}_batchnorm", shape))
        except ShapeError as exc:
            raise ConfigurationError(f"config does not fit input {cfg.input_shape}: {exc}") from None
        self.output_shape = shape

    def _add(self, layer):
        self.layers.append(layer)
        return layer.out_shape

    # -- parameters -------------------------------------------------------
    def param_shapes(self):
        return {layer.key(p): s for layer in self.layers for p, s in layer.param_shapes().items()}

    def buffer_shapes(self):
        return {layer.key(p): s for layer in self.layers for p, s in layer.buffer_shapes().items()}

    def init_params(self, seed):
        params, buffers = {}, {}
        for index, layer in enumerate(self.layers):
            p, b = layer.init(_rng.stream(seed, "weights", index), self.dtype)
            params.update({layer.key(k): v for k, v in p.items()})
            buffers.update({layer.key(k): v for k, v in b.items()})
        return params, buffers

    # -- passes -----------------------------------------------------------
    def forward(self, params, buffers, x, mode="infer", update_running=True):
        """Run every layer; returns ``(logits, caches)``.

        In train mode the batch-norm running statistics in ``buffers`` are
        replaced by their updated values unless ``update_running`` is False.
        """
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != tuple(self.cfg.input_shape):
            raise ShapeError(f"input shape {x.shape[1:]} != configured {tuple(self.cfg.input_shape)}")
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(params, buffers, x, mode, self.cfg)
            caches.append(cache)
            if mode == "train" and update_running and layer.kind == "batchnorm":
                mean, var = cache["running"]
                buffers[layer.key("running_mean")] = mean
                buffers[layer.key("running_var")] = var
        return x, caches

    def backward(self, params, dlogits, caches):
        """Gradients for every trainable parameter (and the input, as ``"input"``)."""
        grads = {}
        dy = dlogits
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy, g = layer.backward(params, dy, cache)
            grads.update(g)
        grads["input"] = dy
        return grads


def _make_layer(name, shape, spec):
    kind = spec["type"]
    if kind == "conv2d":
        return Conv2D(name, shape, spec)
    if kind == "separable_conv2d":
        return SeparableConv2D(name, shape, spec)
    if kind == "batchnorm":
        return BatchNorm(name, shape)
    if kind == "maxpool":
        return MaxPool(name, shape, spec)
    if kind == "relu":
        return ReLU(name, shape)
    raise ConfigurationError(f"unknown layer type {kind!r}")


@dataclass(frozen=True)
class LayerCount:
    name: str
    description: str
    out_shape: tuple
    trainable: int
    non_trainable: int


def layer_counts(cfg):
    """Per-layer trainable/non-trainable parameter counts, from the closed-form rules."""
    rows = []
    for layer in Network(cfg).layers:
        trainable = non_trainable = 0
        if isinstance(layer, SeparableConv2D):
            c = layer.in_shape[0]
            trainable = layer.kh * layer.kw * c + (c + 1) * layer.filters
        elif isinstance(layer, Conv2D):
            trainable = (layer.kh * layer.kw * layer.in_shape[0] + 1) * layer.filters
        elif isinstance(layer, BatchNorm):
            trainable = non_trainable = 2 * layer.channels
        elif isinstance(layer, Dense):
            trainable = (layer.in_shape[0] + 1) * layer.units
        rows.append(LayerCount(layer.name, layer.describe(), layer.out_shape, trainable, non_trainable))
    return rows


def count_parameters(cfg):
    """``(total, trainable, non_trainable)`` for the network ``cfg`` describes."""
    rows = layer_counts(cfg)
    trainable = sum(r.trainable for r in rows)
    non_trainable = sum(r.non_trainable for r in rows)
    return trainable + non_trainable, trainable, non_trainable
