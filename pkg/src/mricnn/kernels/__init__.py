"""Hot inner loops: convolution, depthwise convolution, max pooling, bilinear warp.

Two interchangeable implementations exist. The numba one is used when numba
imports cleanly; setting ``MRICNN_BACKEND=numpy`` before import forces the
pure-numpy path. Both expect C-contiguous arrays with the padding already
applied and allocate fresh outputs.
"""

import os

_requested = os.environ.get("MRICNN_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"MRICNN_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = "numpy"
if _requested == "numba":
    # numba fixes its thread pool size at import; leave room for --threads > cores.
    os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
    _pool_from_us = "NUMBA_NUM_THREADS" not in os.environ
    if _pool_from_us:
        os.environ["NUMBA_NUM_THREADS"] = str(max(os.cpu_count() or 1, 4))
    try:
        import numba as _nb

        from . import _numba as _impl

        BACKEND = "numba"
        if _pool_from_us:
            _nb.set_num_threads(os.cpu_count() or 1)
    except ImportError:  # pragma: no cover - numba missing
        from . import _numpy as _impl
else:
    from . import _numpy as _impl

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weight = _impl.conv2d_backward_weight
depthwise_forward = _impl.depthwise_forward
depthwise_backward_input = _impl.depthwise_backward_input
depthwise_backward_weight = _impl.depthwise_backward_weight
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
warp_bilinear = _impl.warp_bilinear


def set_threads(n):
    """Cap kernel parallelism at ``n`` threads. Results are identical for any ``n``."""
    if n < 1:
        raise ValueError("thread count must be >= 1")
    if BACKEND == "numba":
        import numba

        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


def get_threads():
    if BACKEND == "numba":
        import numba

        return numba.get_num_threads()
    return 1
