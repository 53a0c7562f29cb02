"""Binary checkpoint container.

Layout (all integers little-endian)::

    magic      8 bytes   b"DSCSCKPT"
    version    u16
    meta_len   u32, then meta_len bytes of UTF-8 JSON (config, training record, digest)
    n_params   u32
    per parameter:
        name_len u16, name (UTF-8)
        ndim     u8, dims u32 * ndim
        data     float32 * prod(dims), C order

``meta["config_digest"]`` is the SHA-256 of the canonical JSON of the
architecture config and is checked on load.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DSCSCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def config_digest(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def save_parameters(path, params: dict[str, np.ndarray], config: dict, extra: dict | None = None) -> None:
    meta = {"config": config, "config_digest": config_digest(config), **(extra or {})}
    blob = json.dumps(meta, sort_keys=True).encode()
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HI", VERSION, len(blob))
    out += blob
    out += struct.pack("<I", len(params))
    for name, arr in params.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        nb = name.encode()
        out += struct.pack("<H", len(nb)) + nb
        out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.tobytes()
    Path(path).write_bytes(bytes(out))


def load_parameters(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    pos = 8
    version, meta_len = struct.unpack_from("<HI", raw, pos)
    pos += 6
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    meta = json.loads(raw[pos:pos + meta_len].decode())
    pos += meta_len
    if config_digest(meta["config"]) != meta.get("config_digest"):
        raise CheckpointError(f"{path}: config digest mismatch")
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos:pos + nlen].decode()
        pos += nlen
        (ndim,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        params[name] = np.frombuffer(raw, dtype="<f4", count=n, offset=pos).reshape(shape).copy()
        pos += 4 * n
    if pos != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - pos} trailing bytes")
    return params, meta
