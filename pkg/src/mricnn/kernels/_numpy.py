"""Pure-numpy kernels. Same signatures and semantics as the numba versions."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Sample coordinates this close outside the image still count as inside.
EDGE_EPS = 1e-6


def _out_extent(n, k, stride):
    return (n - k) // stride + 1


def _windows(xp, kh, kw, stride):
    return sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d_forward(xp, w, stride):
    n_b = xp.shape[0]
    c_out, _, kh, kw = w.shape
    ho = _out_extent(xp.shape[2], kh, stride)
    wo = _out_extent(xp.shape[3], kw, stride)
    y = np.empty((n_b, c_out, ho, wo), dtype=xp.dtype)
    for n in range(n_b):
        win = _windows(xp[n : n + 1], kh, kw, stride)[0]  # (C, Ho, Wo, kh, kw)
        y[n] = np.tensordot(w, win, axes=([1, 2, 3], [0, 3, 4]))
    return y


def conv2d_backward_input(dy, w, padded_shape, stride):
    _, _, kh, kw = w.shape
    ho, wo = dy.shape[2], dy.shape[3]
    dxp = np.zeros(padded_shape, dtype=dy.dtype)
    for ki in range(kh):
        for kj in range(kw):
            contrib = np.tensordot(w[:, :, ki, kj], dy, axes=([0], [1]))  # (C, N, Ho, Wo)
            dxp[:, :, ki : ki + stride * (ho - 1) + 1 : stride, kj : kj + stride * (wo - 1) + 1 : stride] += (
                contrib.transpose(1, 0, 2, 3)
            )
    return dxp


def conv2d_backward_weight(dy, xp, kh, kw, stride):
    ho, wo = dy.shape[2], dy.shape[3]
    dw = np.empty((dy.shape[1], xp.shape[1], kh, kw), dtype=dy.dtype)
    for ki in range(kh):
        for kj in range(kw):
            xs = xp[:, :, ki : ki + stride * (ho - 1) + 1 : stride, kj : kj + stride * (wo - 1) + 1 : stride]
            dw[:, :, ki, kj] = np.tensordot(dy, xs, axes=([0, 2, 3], [0, 2, 3]))
    return dw


def depthwise_forward(xp, w, stride):
    _, kh, kw = w.shape
    ho = _out_extent(xp.shape[2], kh, stride)
    wo = _out_extent(xp.shape[3], kw, stride)
    y = np.zeros((xp.shape[0], xp.shape[1], ho, wo), dtype=xp.dtype)
    for ki in range(kh):
        for kj in range(kw):
            xs = xp[:, :, ki : ki + stride * (ho - 1) + 1 : stride, kj : kj + stride * (wo - 1) + 1 : stride]
            y += w[None, :, ki, kj, None, None] * xs
    return y


def depthwise_backward_input(dy, w, padded_shape, stride):
    _, kh, kw = w.shape
    ho, wo = dy.shape[2], dy.shape[3]
    dxp = np.zeros(padded_shape, dtype=dy.dtype)
    for ki in range(kh):
        for kj in range(kw):
            dxp[:, :, ki : ki + stride * (ho - 1) + 1 : stride, kj : kj + stride * (wo - 1) + 1 : stride] += (
                w[None, :, ki, kj, None, None] * dy
            )
    return dxp


def depthwise_backward_weight(dy, xp, kh, kw, stride):
    ho, wo = dy.shape[2], dy.shape[3]
    dw = np.empty((xp.shape[1], kh, kw), dtype=dy.dtype)
    for ki in range(kh):
        for kj in range(kw):
            xs = xp[:, :, ki : ki + stride * (ho - 1) + 1 : stride, kj : kj + stride * (wo - 1) + 1 : stride]
            dw[:, ki, kj] = (dy * xs).sum(axis=(0, 2, 3))
    return dw


def maxpool_forward(x, size, stride):
    n_b, c, h, w = x.shape
    win = _windows(x, size, size, stride)
    ho, wo = win.shape[2], win.shape[3]
    flat = win.reshape(n_b, c, ho, wo, size * size)
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    rows = np.arange(ho)[:, None] * stride + arg // size
    cols = np.arange(wo)[None, :] * stride + arg % size
    return np.ascontiguousarray(y), (rows * w + cols).astype(np.int64)


def maxpool_backward(dy, idx, in_shape):
    n_b, c, h, w = in_shape
    dx = np.zeros((n_b * c, h * w), dtype=dy.dtype)
    rows = np.arange(n_b * c)[:, None]
    np.add.at(dx, (rows, idx.reshape(n_b * c, -1)), dy.reshape(n_b * c, -1))
    return dx.reshape(in_shape)


def warp_bilinear(img, inv, fill):
    """Sample ``img`` at ``inv @ [x, y, 1]`` for every output pixel (x right, y down)."""
    h, w = img.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]
    inside = (sx >= -EDGE_EPS) & (sx <= w - 1 + EDGE_EPS) & (sy >= -EDGE_EPS) & (sy <= h - 1 + EDGE_EPS)
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    src = img.astype(np.float64)
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    return np.where(inside, out, float(fill))
