"""Binary checkpoint format.

Layout::

    b"DSCK"                 magic
    0x01                    version
    uint32 little-endian    header length in bytes
    header                  UTF-8 JSON, sorted keys
    payload                 little-endian float32 tensors, back to back

The header records the config, epoch, Adam hyperparameters and step count,
the master seed from which every random stream is derived, and a manifest
``[{name, group, shape, offset}]`` locating each tensor in the payload.
"""

import json
import math
import struct
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .errors import ConfigurationError, FormatError
from .optim import AdamState
from .training import TrainState

MAGIC = b"DSCK"
VERSION = 1
_PREFIX = struct.Struct("<4sBI")
_F32 = np.dtype("<f4")
GROUPS = ("param", "buffer", "adam_m", "adam_v")


def _groups(state):
    return (
        ("param", state.params),
        ("buffer", state.buffers),
        ("adam_m", state.adam.m),
        ("adam_v", state.adam.v),
    )


def to_bytes(state):
    if state.network.dtype != np.float32:
        raise ValueError("checkpoints store float32 tensors; this model is float64")
    manifest = []
    chunks = []
    offset = 0
    for group, tensors in _groups(state):
        for name, arr in tensors.items():
            data = np.ascontiguousarray(arr, dtype=_F32).tobytes()
            manifest.append({"name": name, "group": group, "shape": list(arr.shape), "offset": offset})
            chunks.append(data)
            offset += len(data)
    a = state.adam
    header = {
        "config": state.config.to_dict(),
        "epoch": state.epoch,
        "best_val_acc": state.best_val_acc,
        "adam": {"lr": a.lr, "beta1": a.beta1, "beta2": a.beta2, "epsilon": a.epsilon, "t": a.t},
        "rng": {"master_seed": state.config.seed, "next_epoch": state.epoch + 1},
        "tensors": manifest,
        "payload_bytes": offset,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(blob)) + blob + b"".join(chunks)


def from_bytes(buf):
    if len(buf) < _PREFIX.size:
        raise FormatError(f"checkpoint truncated: {len(buf)} bytes, prefix needs {_PREFIX.size}", offset=len(buf))
    magic, version, hlen = _PREFIX.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    start = _PREFIX.size
    if len(buf) < start + hlen:
        raise FormatError(f"checkpoint header truncated: need {hlen} bytes", offset=len(buf))
    try:
        header = json.loads(buf[start : start + hlen].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        manifest = header["tensors"]
        payload_bytes = int(header["payload_bytes"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError, ConfigurationError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}", offset=start) from None
    base = start + hlen
    if len(buf) - base < payload_bytes:
        raise FormatError(
            f"checkpoint payload truncated: need {payload_bytes} bytes, have {len(buf) - base}", offset=len(buf)
        )
    if len(buf) - base > payload_bytes:
        raise FormatError(f"{len(buf) - base - payload_bytes} unexpected trailing bytes", offset=base + payload_bytes)

    groups = {g: {} for g in GROUPS}
    for entry in manifest:
        shape = tuple(int(d) for d in entry["shape"])
        nbytes = math.prod(shape) * _F32.itemsize
        off = int(entry["offset"])
        if entry["group"] not in groups or off < 0 or off + nbytes > payload_bytes:
            raise FormatError(f"bad manifest entry for {entry.get('name')!r}", offset=start)
        arr = np.frombuffer(buf, dtype=_F32, count=math.prod(shape), offset=base + off).reshape(shape)
        groups[entry["group"]][entry["name"]] = arr.astype(np.float32)

    a = header["adam"]
    adam = AdamState(a["lr"], a["beta1"], a["beta2"], a["epsilon"], int(a["t"]), groups["adam_m"], groups["adam_v"])
    state = TrainState(config, groups["param"], groups["buffer"], adam, int(header["epoch"]), float(header["best_val_acc"]))
    expected = state.network.param_shapes()
    got = {k: v.shape for k, v in state.params.items()}
    if got != expected or set(adam.m) != set(expected) or set(adam.v) != set(expected):
        raise FormatError("tensor manifest does not match the config's parameters", offset=start)
    if {k: v.shape for k, v in state.buffers.items()} != state.network.buffer_shapes():
        raise FormatError("buffer manifest does not match the config", offset=start)
    return state


def save_checkpoint(state, path):
    Path(path).write_bytes(to_bytes(state))


def load_checkpoint(path):
    return from_bytes(Path(path).read_bytes())
