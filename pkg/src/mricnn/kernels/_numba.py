"""numba kernels.

Each ``prange`` iteration owns a disjoint slice of the output and walks its
reduction in a fixed order, so results do not depend on the thread count.
"""

import numpy as np
from numba import njit, prange

EDGE_EPS = 1e-6


@njit(parallel=True, cache=True)
def conv2d_forward(xp, w, stride):
    n_b, c_in, hp, wp = xp.shape
    c_out, _, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    y = np.zeros((n_b, c_out, ho, wo), dtype=xp.dtype)
    for job in prange(n_b * c_out):
        n = job // c_out
        o = job % c_out
        for c in range(c_in):
            for ki in range(kh):
                for kj in range(kw):
                    wv = w[o, c, ki, kj]
                    for i in range(ho):
                        r = i * stride + ki
                        for j in range(wo):
                            y[n, o, i, j] += wv * xp[n, c, r, j * stride + kj]
    return y


@njit(parallel=True, cache=True)
def _conv2d_backward_input(dy, w, dxp, stride):
    n_b, c_out, ho, wo = dy.shape
    _, c_in, kh, kw = w.shape
    for job in prange(n_b * c_in):
        n = job // c_in
        c = job % c_in
        for o in range(c_out):
            for ki in range(kh):
                for kj in range(kw):
                    wv = w[o, c, ki, kj]
                    for i in range(ho):
                        r = i * stride + ki
                        for j in range(wo):
                            dxp[n, c, r, j * stride + kj] += wv * dy[n, o, i, j]
    return dxp


def conv2d_backward_input(dy, w, padded_shape, stride):
    return _conv2d_backward_input(dy, w, np.zeros(padded_shape, dtype=dy.dtype), stride)


@njit(parallel=True, cache=True)
def _conv2d_backward_weight(dy, xp, dw, stride):
    n_b, c_out, ho, wo = dy.shape
    c_in = xp.shape[1]
    kh = dw.shape[2]
    kw = dw.shape[3]
    for job in prange(c_out * c_in):
        o = job // c_in
        c = job % c_in
        for ki in range(kh):
            for kj in range(kw):
                acc = 0.0
                for n in range(n_b):
                    for i in range(ho):
                        r = i * stride + ki
                        for j in range(wo):
                            acc += dy[n, o, i, j] * xp[n, c, r, j * stride + kj]
                dw[o, c, ki, kj] = acc
    return dw


def conv2d_backward_weight(dy, xp, kh, kw, stride):
    dw = np.empty((dy.shape[1], xp.shape[1], kh, kw), dtype=dy.dtype)
    return _conv2d_backward_weight(dy, xp, dw, stride)


@njit(parallel=True, cache=True)
def depthwise_forward(xp, w, stride):
    n_b, c_in, hp, wp = xp.shape
    _, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    y = np.zeros((n_b, c_in, ho, wo), dtype=xp.dtype)
    for job in prange(n_b * c_in):
        n = job // c_in
        c = job % c_in
        for ki in range(kh):
            for kj in range(kw):
                wv = w[c, ki, kj]
                for i in range(ho):
                    r = i * stride + ki
                    for j in range(wo):
                        y[n, c, i, j] += wv * xp[n, c, r, j * stride + kj]
    return y


@njit(parallel=True, cache=True)
def _depthwise_backward_input(dy, w, dxp, stride):
    n_b, c_in, ho, wo = dy.shape
    _, kh, kw = w.shape
    for job in prange(n_b * c_in):
        n = job // c_in
        c = job % c_in
        for ki in range(kh):
            for kj in range(kw):
                wv = w[c, ki, kj]
                for i in range(ho):
                    r = i * stride + ki
                    for j in range(wo):
                        dxp[n, c, r, j * stride + kj] += wv * dy[n, c, i, j]
    return dxp


def depthwise_backward_input(dy, w, padded_shape, stride):
    return _depthwise_backward_input(dy, w, np.zeros(padded_shape, dtype=dy.dtype), stride)


@njit(parallel=True, cache=True)
def _depthwise_backward_weight(dy, xp, dw, stride):
    n_b, c_in, ho, wo = dy.shape
    kh = dw.shape[1]
    kw = dw.shape[2]
    for c in prange(c_in):
        for ki in range(kh):
            for kj in range(kw):
                acc = 0.0
                for n in range(n_b):
                    for i in range(ho):
                        r = i * stride + ki
                        for j in range(wo):
                            acc += dy[n, c, i, j] * xp[n, c, r, j * stride + kj]
                dw[c, ki, kj] = acc
    return dw


def depthwise_backward_weight(dy, xp, kh, kw, stride):
    dw = np.empty((xp.shape[1], kh, kw), dtype=dy.dtype)
    return _depthwise_backward_weight(dy, xp, dw, stride)


@njit(parallel=True, cache=True)
def maxpool_forward(x, size, stride):
    n_b, c, h, w = x.shape
    ho = (h - size) // stride + 1
    wo = (w - size) // stride + 1
    y = np.empty((n_b, c, ho, wo), dtype=x.dtype)
    idx = np.empty((n_b, c, ho, wo), dtype=np.int64)
    for job in prange(n_b * c):
        n = job // c
        ch = job % c
        for i in range(ho):
            for j in range(wo):
                r0 = i * stride
                c0 = j * stride
                best = x[n, ch, r0, c0]
                where = r0 * w + c0
                for a in range(size):
                    for b in range(size):
                        v = x[n, ch, r0 + a, c0 + b]
                        if v > best:
                            best = v
                            where = (r0 + a) * w + c0 + b
                y[n, ch, i, j] = best
                idx[n, ch, i, j] = where
    return y, idx


@njit(parallel=True, cache=True)
def _maxpool_backward(dy, idx, dx):
    n_b, c, ho, wo = dy.shape
    w = dx.shape[3]
    for job in prange(n_b * c):
        n = job // c
        ch = job % c
        for i in range(ho):
            for j in range(wo):
                k = idx[n, ch, i, j]
                dx[n, ch, k // w, k % w] += dy[n, ch, i, j]
    return dx


def maxpool_backward(dy, idx, in_shape):
    return _maxpool_backward(dy, idx, np.zeros(in_shape, dtype=dy.dtype))


@njit(parallel=True, cache=True)
def _warp_bilinear(src, inv, fill):
    h, w = src.shape
    out = np.empty((h, w), dtype=np.float64)
    for yy in prange(h):
        for xx in range(w):
            sx = inv[0, 0] * xx + inv[0, 1] * yy + inv[0, 2]
            sy = inv[1, 0] * xx + inv[1, 1] * yy + inv[1, 2]
            if sx < -EDGE_EPS or sx > w - 1 + EDGE_EPS or sy < -EDGE_EPS or sy > h - 1 + EDGE_EPS:
                out[yy, xx] = fill
                continue
            sx = min(max(sx, 0.0), w - 1.0)
            sy = min(max(sy, 0.0), h - 1.0)
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = sx - x0
            fy = sy - y0
            top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
            bottom = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
            out[yy, xx] = top * (1.0 - fy) + bottom * fy
    return out


def warp_bilinear(img, inv, fill):
    """Sample ``img`` at ``inv @ [x, y, 1]`` for every output pixel (x right, y down)."""
    return _warp_bilinear(np.ascontiguousarray(img, dtype=np.float64), np.ascontiguousarray(inv, dtype=np.float64), float(fill))
