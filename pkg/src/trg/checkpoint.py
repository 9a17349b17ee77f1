"""Binary checkpoint files for model weights.

Layout: magic b"TRGW", version uint16, then one record per array until EOF.
Record: name length uint16, UTF-8 name, rank uint8, one uint32 extent per
axis, payload of little-endian float32 in row-major order. Batchnorm running
statistics are stored as ordinary records alongside the weights.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"TRGW"
VERSION = 1


def save_weights(path, state):
    """Write a name -> array mapping; iteration order is preserved."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", VERSION))
        for name, arr in state.items():
            arr = np.asarray(arr)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            for extent in arr.shape:
                f.write(struct.pack("<I", extent))
            f.write(arr.astype("<f4").tobytes(order="C"))


def load_weights(path):
    """Read a checkpoint back as a name -> float32 array dict."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a TRGW file (magic {blob[:4]!r})")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported TRGW version {version}")
    pos = 6
    state = {}
    while pos < len(blob):
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        shape = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        count = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).reshape(shape)
        pos += 4 * count
        if name in state:
            raise ValueError(f"{path}: duplicate record {name!r}")
        state[name] = arr.copy()
    return state


def model_state(module):
    state = {name: p.data for name, p in module.named_parameters()}
    for name, buf in module.named_buffers():
        if name in state:
            raise ValueError(f"parameter/buffer name clash: {name!r}")
        state[name] = buf
    return state


def save_model(path, module):
    save_weights(path, model_state(module))


def load_model(path, module):
    """Copy checkpointed values into an already-built module, in place."""
    state = load_weights(path)
    target = model_state(module)
    missing = sorted(set(target) - set(state))
    extra = sorted(set(state) - set(target))
    if missing or extra:
        raise ValueError(f"checkpoint mismatch: missing {missing}, unexpected {extra}")
    for name, arr in state.items():
        dst = target[name]
        if dst.shape != arr.shape:
            raise ValueError(f"{name}: checkpoint shape {arr.shape} vs model {dst.shape}")
        dst[...] = arr.astype(dst.dtype)
