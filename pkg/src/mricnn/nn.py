"""Layer forward and backward passes on ``(N, C, H, W)`` ndarrays.

Every forward function returns ``(output, cache)``; the matching
``*_backward`` takes the upstream gradient and that cache and returns
gradients for the input and each parameter, in the order the parameters
were passed to the forward call. A cache may be consumed once.

Conventions: convolution is cross-correlation; "same" padding puts the odd
extra pixel on the bottom/right; ReLU has derivative 0 at 0; max-pool ties
go to the first position in row-major order.
"""

import numpy as np

from . import kernels
from .errors import ContractError, ShapeError

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.01


class ForwardCache(dict):
    """Saved forward state for one layer call."""

    def __init__(self, layer, **saved):
        super().__init__(saved)
        self.layer = layer
        self.consumed = False


def _consume(cache, layer):
    if not isinstance(cache, ForwardCache) or cache.layer != layer:
        got = getattr(cache, "layer", type(cache).__name__)
        raise ContractError(f"{layer}_backward received a cache from {got}")
    if cache.consumed:
        raise ContractError(f"{layer} cache already consumed by a backward call")
    cache.consumed = True
    return cache


def _check_grad(dy, shape, layer):
    if dy.shape != tuple(shape):
        raise ContractError(f"{layer}_backward: gradient shape {dy.shape} != forward output {tuple(shape)}")


def padding_for(n, k, stride, padding):
    """Return ``(before, after, out)`` along one spatial axis of extent ``n``."""
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if padding == "same":
        out = -(-n // stride)
        total = max((out - 1) * stride + k - n, 0)
        before = total // 2
        after = total - before
    elif padding == "valid":
        before = after = 0
        out = (n - k) // stride + 1
    else:
        raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")
    if k > n + before + after or out < 1:
        raise ShapeError(f"kernel extent {k} larger than padded input extent {n + before + after}")
    return before, after, out


def _pad(x, kh, kw, stride, padding):
    top, bottom, _ = padding_for(x.shape[2], kh, stride, padding)
    left, right, _ = padding_for(x.shape[3], kw, stride, padding)
    pads = (top, bottom, left, right)
    if any(pads):
        x = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    return np.ascontiguousarray(x), pads


def _unpad(dxp, pads):
    top, bottom, left, right = pads
    h, w = dxp.shape[2], dxp.shape[3]
    return np.ascontiguousarray(dxp[:, :, top : h - bottom, left : w - right])


def _check_input(x, rank, layer):
    if x.ndim != rank:
        raise ShapeError(f"{layer} expects a rank-{rank} input, got shape {x.shape}")


# -- convolution ---------------------------------------------------------


def conv2d(x, weight, bias, stride=1, padding="same"):
    _check_input(x, 4, "conv2d")
    c_out, c_in, kh, kw = weight.shape
    if x.shape[1] != c_in:
        raise ShapeError(f"conv2d: input has {x.shape[1]} channels, weight expects {c_in}")
    if bias.shape != (c_out,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} != ({c_out},)")
    xp, pads = _pad(x, kh, kw, stride, padding)
    y = kernels.conv2d_forward(xp, np.ascontiguousarray(weight, dtype=xp.dtype), stride)
    y += bias.astype(y.dtype)[None, :, None, None]
    return y, ForwardCache("conv2d", xp=xp, weight=weight, pads=pads, stride=stride, out_shape=y.shape)


def conv2d_backward(dy, cache):
    c = _consume(cache, "conv2d")
    _check_grad(dy, c["out_shape"], "conv2d")
    dy = np.ascontiguousarray(dy, dtype=c["xp"].dtype)
    w = np.ascontiguousarray(c["weight"], dtype=dy.dtype)
    _, _, kh, kw = w.shape
    dxp = kernels.conv2d_backward_input(dy, w, c["xp"].shape, c["stride"])
    dw = kernels.conv2d_backward_weight(dy, c["xp"], kh, kw, c["stride"])
    db = dy.sum(axis=(0, 2, 3))
    return _unpad(dxp, c["pads"]), dw, db


def depthwise_conv2d(x, weight, stride=1, padding="same"):
    """Per-channel spatial convolution, depth multiplier 1, no bias."""
    _check_input(x, 4, "depthwise_conv2d")
    c_in, kh, kw = weight.shape
    if x.shape[1] != c_in:
        raise ShapeError(f"depthwise_conv2d: input has {x.shape[1]} channels, weight expects {c_in}")
    xp, pads = _pad(x, kh, kw, stride, padding)
    y = kernels.depthwise_forward(xp, np.ascontiguousarray(weight, dtype=xp.dtype), stride)
    return y, ForwardCache("depthwise_conv2d", xp=xp, weight=weight, pads=pads, stride=stride, out_shape=y.shape)


def depthwise_conv2d_backward(dy, cache):
    c = _consume(cache, "depthwise_conv2d")
    _check_grad(dy, c["out_shape"], "depthwise_conv2d")
    dy = np.ascontiguousarray(dy, dtype=c["xp"].dtype)
    w = np.ascontiguousarray(c["weight"], dtype=dy.dtype)
    _, kh, kw = w.shape
    dxp = kernels.depthwise_backward_input(dy, w, c["xp"].shape, c["stride"])
    dw = kernels.depthwise_backward_weight(dy, c["xp"], kh, kw, c["stride"])
    return _unpad(dxp, c["pads"]), dw


def pointwise_conv2d(x, weight, bias):
    """1x1 convolution mixing channels: ``weight`` is ``(C_out, C_in)``."""
    _check_input(x, 4, "pointwise_conv2d")
    n, c_in, h, w = x.shape
    if weight.shape[1] != c_in:
        raise ShapeError(f"pointwise_conv2d: input has {c_in} channels, weight expects {weight.shape[1]}")
    flat = x.reshape(n, c_in, h * w)
    y = np.matmul(weight.astype(x.dtype), flat).reshape(n, weight.shape[0], h, w)
    y += bias.astype(x.dtype)[None, :, None, None]
    return y, ForwardCache("pointwise_conv2d", x=x, weight=weight, out_shape=y.shape)


def pointwise_conv2d_backward(dy, cache):
    c = _consume(cache, "pointwise_conv2d")
    _check_grad(dy, c["out_shape"], "pointwise_conv2d")
    x, weight = c["x"], c["weight"]
    n, c_in, h, w = x.shape
    dy_flat = dy.reshape(n, dy.shape[1], h * w)
    dx = np.matmul(weight.T.astype(dy.dtype), dy_flat).reshape(x.shape)
    dw = np.tensordot(dy_flat, x.reshape(n, c_in, h * w), axes=([0, 2], [0, 2]))
    db = dy.sum(axis=(0, 2, 3))
    return dx, dw, db


def separable_conv2d(x, depthwise_weight, pointwise_weight, pointwise_bias, stride=1, padding="same"):
    z, dcache = depthwise_conv2d(x, depthwise_weight, stride, padding)
    y, pcache = pointwise_conv2d(z, pointwise_weight, pointwise_bias)
    return y, ForwardCache("separable_conv2d", depthwise=dcache, pointwise=pcache, out_shape=y.shape)


def separable_conv2d_backward(dy, cache):
    c = _consume(cache, "separable_conv2d")
    _check_grad(dy, c["out_shape"], "separable_conv2d")
    dz, dpw, dpb = pointwise_conv2d_backward(dy, c["pointwise"])
    dx, ddw = depthwise_conv2d_backward(dz, c["depthwise"])
    return dx, ddw, dpw, dpb


# -- normalization -------------------------------------------------------


def _bn_axes(x):
    if x.ndim == 4:
        return (0, 2, 3), (1, -1, 1, 1)
    if x.ndim == 2:
        return (0,), (1, -1)
    raise ShapeError(f"batchnorm expects rank 2 or 4 input, got shape {x.shape}")


def batchnorm(x, gamma, beta, running_mean, running_var, mode="train", momentum=BN_MOMENTUM, eps=BN_EPSILON):
    """Per-channel batch normalization over all axes except 1.

    In train mode the batch statistics normalize the input and the cache
    carries the updated running statistics under ``"running"``:
    ``running = (1 - momentum) * running + momentum * batch`` with the
    biased batch variance. The caller decides whether to adopt them. Infer
    mode reads the running statistics and never changes them.
    """
    axes, view = _bn_axes(x)
    count = x.size // x.shape[1]
    if mode == "train":
        if count < 2:
            raise ShapeError("batchnorm train mode needs at least 2 values per channel")
        mean = x.mean(axis=axes, dtype=np.float64)
        var = ((x - mean.reshape(view).astype(x.dtype)) ** 2).mean(axis=axes, dtype=np.float64)
        new_mean = (1.0 - momentum) * running_mean + momentum * mean
        new_var = (1.0 - momentum) * running_var + momentum * var
        running = (new_mean.astype(running_mean.dtype), new_var.astype(running_var.dtype))
    elif mode == "infer":
        mean = np.asarray(running_mean, dtype=np.float64)
        var = np.asarray(running_var, dtype=np.float64)
        running = None
    else:
        raise ValueError(f"batchnorm mode must be 'train' or 'infer', got {mode!r}")
    if np.any(var + eps <= 0):
        raise ArithmeticError("batchnorm variance + epsilon is not positive")
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x - mean.astype(x.dtype).reshape(view)) * inv_std.reshape(view)
    y = xhat * gamma.astype(x.dtype).reshape(view) + beta.astype(x.dtype).reshape(view)
    cache = ForwardCache(
        "batchnorm", xhat=xhat, inv_std=inv_std, gamma=gamma, mode=mode, running=running, out_shape=y.shape
    )
    return y, cache


def batchnorm_backward(dy, cache):
    c = _consume(cache, "batchnorm")
    _check_grad(dy, c["out_shape"], "batchnorm")
    xhat, inv_std = c["xhat"], c["inv_std"]
    axes, view = _bn_axes(xhat)
    dbeta = dy.sum(axis=axes)
    dgamma = (dy * xhat).sum(axis=axes)
    dxhat = dy * c["gamma"].astype(dy.dtype).reshape(view)
    if c["mode"] == "infer":
        return dxhat * inv_std.reshape(view), dgamma, dbeta
    m = xhat.size // xhat.shape[1]
    dx = (inv_std / m).reshape(view) * (
        m * dxhat - dxhat.sum(axis=axes).reshape(view) - xhat * (dxhat * xhat).sum(axis=axes).reshape(view)
    )
    return dx, dgamma, dbeta


# -- pooling, activation, reshaping --------------------------------------


def maxpool2d(x, size=2, stride=2):
    _check_input(x, 4, "maxpool2d")
    if x.shape[2] < size or x.shape[3] < size:
        raise ShapeError(f"pool window {size}x{size} larger than input {x.shape[2]}x{x.shape[3]}")
    y, idx = kernels.maxpool_forward(np.ascontiguousarray(x), size, stride)
    return y, ForwardCache("maxpool2d", idx=idx, in_shape=x.shape, out_shape=y.shape)


def maxpool2d_backward(dy, cache):
    c = _consume(cache, "maxpool2d")
    _check_grad(dy, c["out_shape"], "maxpool2d")
    return kernels.maxpool_backward(np.ascontiguousarray(dy), c["idx"], c["in_shape"])


def relu(x):
    mask = x > 0
    return np.where(mask, x, x.dtype.type(0)), ForwardCache("relu", mask=mask, out_shape=x.shape)


def relu_backward(dy, cache):
    c = _consume(cache, "relu")
    _check_grad(dy, c["out_shape"], "relu")
    return np.where(c["mask"], dy, dy.dtype.type(0))


def dense(x, weight, bias):
    """Fully connected layer: ``x @ weight.T + bias`` with weight ``(out, in)``."""
    _check_input(x, 2, "dense")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"dense: input width {x.shape[1]} != weight input width {weight.shape[1]}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"dense: bias shape {bias.shape} != ({weight.shape[0]},)")
    y = x @ weight.T.astype(x.dtype) + bias.astype(x.dtype)
    return y, ForwardCache("dense", x=x, weight=weight, out_shape=y.shape)


def dense_backward(dy, cache):
    c = _consume(cache, "dense")
    _check_grad(dy, c["out_shape"], "dense")
    dx = dy @ c["weight"].astype(dy.dtype)
    dw = dy.T @ c["x"]
    db = dy.sum(axis=0)
    return dx, dw, db


def flatten(x):
    _check_input(x, 4, "flatten")
    return x.reshape(x.shape[0], -1), ForwardCache("flatten", in_shape=x.shape, out_shape=(x.shape[0], x[0].size))


def flatten_backward(dy, cache):
    c = _consume(cache, "flatten")
    _check_grad(dy, c["out_shape"], "flatten")
    return dy.reshape(c["in_shape"])


def softmax(logits):
    """Row-wise softmax with max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)
