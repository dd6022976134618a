"""A small dense N-d array with row-major layout.

``Tensor`` is an immutable value: operations return new tensors and never
alias their inputs' storage. Storage is a flat numpy buffer; the layer code in
:mod:`mricnn.nn` works on plain ndarrays and converts at the edges with
:meth:`Tensor.numpy` / :meth:`Tensor.from_numpy`.
"""

import math
import sys

import numpy as np

from . import rng as _rng
from .errors import DomainError, ShapeError, SizeError

DTYPES = {"float32": np.float32, "float64": np.float64}


def _resolve_dtype(dtype):
    if isinstance(dtype, str):
        try:
            return np.dtype(DTYPES[dtype])
        except KeyError:
            raise ValueError(f"unsupported dtype {dtype!r}; use float32 or float64") from None
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dt}")
    return dt


def row_major_strides(shape):
    """Element strides for a contiguous row-major array of ``shape``."""
    strides = [1] * len(shape)
    for axis in range(len(shape) - 2, -1, -1):
        strides[axis] = strides[axis + 1] * shape[axis + 1]
    return tuple(strides)


def _check_shape(shape, dtype):
    shape = tuple(int(d) for d in shape)
    if any(d < 0 for d in shape):
        raise ShapeError(f"negative extent in shape {shape}")
    count = math.prod(shape)
    if count * dtype.itemsize > sys.maxsize:
        raise SizeError(f"shape {shape} needs {count} elements, beyond addressable size")
    return shape, count


class Tensor:
    __slots__ = ("_shape", "_data")

    def __init__(self, shape, data, dtype="float32"):
        dt = _resolve_dtype(dtype)
        shape, count = _check_shape(shape, dt)
        buf = np.array(data, dtype=dt, copy=True).reshape(-1)
        if buf.size != count:
            raise ShapeError(f"{buf.size} values cannot fill shape {shape}")
        buf.flags.writeable = False
        self._shape = shape
        self._data = buf

    # -- construction ----------------------------------------------------
    @classmethod
    def create(cls, shape, fill=0.0, *, seed=None, dist="normal", loc=0.0, scale=1.0, dtype="float32"):
        """Build a tensor filled with a constant or with seeded random draws.

        Pass ``seed`` to fill from ``dist`` ("normal" or "uniform"); the same
        seed always yields the same values.
        """
        dt = _resolve_dtype(dtype)
        shape, count = _check_shape(shape, dt)
        if seed is None:
            return cls(shape, np.full(count, fill, dtype=dt), dt)
        gen = _rng.stream(seed, "tensor")
        if dist == "normal":
            vals = gen.normal(loc, scale, size=count)
        elif dist == "uniform":
            vals = gen.uniform(loc, loc + scale, size=count)
        else:
            raise ValueError(f"unknown distribution {dist!r}")
        return cls(shape, vals, dt)

    @classmethod
    def from_numpy(cls, arr, dtype=None):
        arr = np.asarray(arr)
        return cls(arr.shape, arr, dtype if dtype is not None else (arr.dtype if arr.dtype == np.float64 else "float32"))

    # -- introspection ---------------------------------------------------
    @property
    def shape(self):
        return self._shape

    @property
    def strides(self):
        return row_major_strides(self._shape)

    @property
    def dtype(self):
        return self._data.dtype

    @property
    def data(self):
        """The flat read-only storage buffer."""
        return self._data

    @property
    def size(self):
        return self._data.size

    def numpy(self):
        return self._data.reshape(self._shape).copy()

    def __array__(self, dtype=None, copy=None):
        out = self._data.reshape(self._shape)
        return out.astype(dtype) if dtype is not None else out.copy()

    def __getitem__(self, index):
        flat = 0
        if len(index) != len(self._shape):
            raise IndexError("index rank does not match tensor rank")
        for i, extent, stride in zip(index, self._shape, self.strides):
            if not 0 <= i < extent:
                raise IndexError(f"index {index} out of bounds for shape {self._shape}")
            flat += i * stride
        return self._data[flat].item()

    def reshape(self, shape):
        shape = tuple(shape)
        if math.prod(shape) != self.size:
            raise ShapeError(f"cannot reshape {self._shape} to {shape}")
        return Tensor(shape, self._data, self.dtype)

    def tolist(self):
        return self.numpy().tolist()

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self._shape == other._shape and bool(np.array_equal(self._data, other._data))

    __hash__ = None

    def __repr__(self):
        return f"Tensor(shape={self._shape}, dtype={self.dtype}, data={self.numpy().tolist()!r})"


_ELEMENTWISE = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "scalar-mul": np.multiply,
    "max-with-scalar": np.maximum,
}


def elementwise(op, a, b, *, channel_axis=None):
    """Apply ``op`` element by element.

    ``b`` is a tensor of the same shape, a scalar (for ``scalar-mul`` and
    ``max-with-scalar``), or, when ``channel_axis`` is given, a 1-d tensor
    broadcast along that axis of ``a``.
    """
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    x = a._data.reshape(a.shape)
    if op in ("scalar-mul", "max-with-scalar"):
        if isinstance(b, Tensor):
            raise ShapeError(f"{op} takes a scalar right operand")
        return Tensor(a.shape, fn(x, a.dtype.type(b)), a.dtype)
    if not isinstance(b, Tensor):
        return Tensor(a.shape, fn(x, a.dtype.type(b)), a.dtype)
    if channel_axis is not None:
        if b.shape != (a.shape[channel_axis],):
            raise ShapeError(f"channel operand {b.shape} does not match axis {channel_axis} of {a.shape}")
        view = [1] * len(a.shape)
        view[channel_axis] = a.shape[channel_axis]
        return Tensor(a.shape, fn(x, b._data.reshape(view)), a.dtype)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return Tensor(a.shape, fn(x, b._data.reshape(b.shape)), a.dtype)


def add(a, b):
    return elementwise("add", a, b)


def sub(a, b):
    return elementwise("sub", a, b)


def mul(a, b):
    return elementwise("mul", a, b)


def matmul(a, b):
    if len(a.shape) != 2 or len(b.shape) != 2:
        raise ShapeError("matmul takes two 2-d tensors")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner extents differ: {a.shape} x {b.shape}")
    out = a._data.reshape(a.shape) @ b._data.reshape(b.shape)
    return Tensor(out.shape, out, np.result_type(a.dtype, b.dtype))


def reduce(op, a, axes=None, keepdims=False):
    """Reduce over ``axes`` (None means all) with sum, mean, max or argmax.

    ``argmax`` takes a single axis (or None for the flat index) and returns
    the first maximal position.
    """
    x = a._data.reshape(a.shape)
    if axes is None:
        axes_t = tuple(range(len(a.shape)))
    elif isinstance(axes, int):
        axes_t = (axes,)
    else:
        axes_t = tuple(axes)
    for ax in axes_t:
        if not -len(a.shape) <= ax < len(a.shape):
            raise ShapeError(f"axis {ax} out of range for shape {a.shape}")
        if a.shape[ax] == 0:
            raise DomainError(f"reduction over empty axis {ax}")
    if op == "sum":
        out = x.sum(axis=axes_t, keepdims=keepdims)
    elif op == "mean":
        out = x.sum(axis=axes_t, keepdims=keepdims) / math.prod(a.shape[ax] for ax in axes_t)
    elif op == "max":
        out = x.max(axis=axes_t, keepdims=keepdims)
    elif op == "argmax":
        if axes is None:
            out = np.argmax(x.reshape(-1))
        elif len(axes_t) != 1:
            raise ShapeError("argmax reduces over exactly one axis")
        else:
            out = np.argmax(x, axis=axes_t[0], keepdims=keepdims)
        out = np.asarray(out, dtype=np.float64)
        return Tensor(out.shape, out, "float64")
    else:
        raise ValueError(f"unknown reduction {op!r}")
    out = np.asarray(out, dtype=a.dtype)
    return Tensor(out.shape, out, a.dtype)
