"""Binary checkpoint format with bit-exact round trips.

Layout, all integers little-endian:

* magic bytes ``SRRU``
* format version as u16
* u32 byte length, then the training config as UTF-8 ``key=value`` lines
  (plus reserved ``ckpt_epoch`` / ``ckpt_step`` / ``ckpt_lr`` state keys)
* tensor records until EOF: u32 name length + UTF-8 name, u32 rank,
  rank u32 dims, then raw little-endian float32 data

Parameter tensors use their :func:`srru.model.named_parameters` names;
optimizer velocity buffers use the same names behind a ``velocity/`` prefix.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from srru import model, train
from srru.validation import CheckpointError

MAGIC = b"SRRU"
VERSION = 1
_STATE_KEYS = ("ckpt_epoch", "ckpt_step", "ckpt_lr")


def save_checkpoint(path, config, params, state, epoch):
    named = model.named_parameters(params)
    text = train.config_to_text(config)
    text += f"ckpt_epoch = {epoch}\nckpt_step = {state.step}\nckpt_lr = {state.lr!r}\n"
    blob = text.encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for name, arr in named.items():
            _write_tensor(f, name, arr)
        for name, arr in state.velocity.items():
            _write_tensor(f, f"velocity/{name}", arr)
    return path


def _write_tensor(f, name, arr):
    encoded = name.encode("utf-8")
    f.write(struct.pack("<I", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<I", arr.ndim))
    if arr.ndim:
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_exact(f, count, what):
    buf = f.read(count)
    if len(buf) != count:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return buf


def _read_tensors(f):
    tensors = {}
    while True:
        head = f.read(4)
        if not head:
            return tensors
        if len(head) != 4:
            raise CheckpointError("truncated checkpoint in tensor record header")
        (name_len,) = struct.unpack("<I", head)
        name = _read_exact(f, name_len, "tensor name").decode("utf-8")
        (rank,) = struct.unpack("<I", _read_exact(f, 4, "tensor rank"))
        dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "tensor dims")) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        raw = _read_exact(f, 4 * count, f"tensor data for {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()


def load_checkpoint(path):
    """Returns (config, params, optimizer state, epoch), rebuilt bit-exactly."""
    path = Path(path)
    try:
        f = open(path, "rb")
    except OSError as exc:
        raise CheckpointError(f"cannot open checkpoint {path}: {exc}") from exc
    with f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
        (version,) = struct.unpack("<H", _read_exact(f, 2, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (blob_len,) = struct.unpack("<I", _read_exact(f, 4, "config length"))
        text = _read_exact(f, blob_len, "config text").decode("utf-8")
        tensors = _read_tensors(f)

    config_lines = []
    state_values = {}
    for line in text.splitlines():
        key = line.split("=", 1)[0].strip()
        if key in _STATE_KEYS:
            state_values[key] = line.split("=", 1)[1].strip()
        else:
            config_lines.append(line)
    config = train.TrainingConfig(**train.parse_config_text("\n".join(config_lines)))

    params = train.build_from_config(config)
    named = model.named_parameters(params)
    velocity = {}
    for name, arr in tensors.items():
        if name.startswith("velocity/"):
            velocity[name[len("velocity/"):]] = arr
            continue
        if name not in named:
            raise CheckpointError(f"checkpoint tensor {name!r} not in model")
        if named[name].shape != arr.shape:
            raise CheckpointError(
                f"checkpoint tensor {name!r} shape {arr.shape} != model {named[name].shape}"
            )
        named[name][...] = arr
    missing = [n for n in named if n not in tensors]
    if missing:
        raise CheckpointError(f"checkpoint missing tensors: {missing[:3]}...")

    state = train.OptimizerState(
        velocity={k: velocity.get(k, np.zeros_like(v)) for k, v in named.items()},
        step=int(state_values.get("ckpt_step", 0)),
        lr=float(state_values.get("ckpt_lr", config.learning_rate)),
    )
    epoch = int(state_values.get("ckpt_epoch", 0))
    return config, params, state, epoch
