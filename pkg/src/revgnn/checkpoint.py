"""Binary checkpoint container.

Layout (little-endian)::

    b"RGNN1"
    u32 tensor count
    per tensor: u16 name length, utf-8 name, u8 rank, u64 dims[rank], f64 payload
    u64 metadata length, utf-8 JSON (RNG states, counters, config, hashes)
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InputError

MAGIC = b"RGNN1"


def write_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict):
    chunks = [MAGIC, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks.append(struct.pack("<Q", len(blob)))
    chunks.append(blob)
    Path(path).write_bytes(b"".join(chunks))


def read_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from None
    if not raw.startswith(MAGIC):
        raise InputError(f"{path}: not a checkpoint (bad magic)")
    try:
        pos = len(MAGIC)
        (count,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        tensors = {}
        for _ in range(count):
            (length,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            name = raw[pos:pos + length].decode("utf-8")
            pos += length
            (rank,) = struct.unpack_from("<B", raw, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}Q", raw, pos)
            pos += 8 * rank
            size = int(np.prod(dims, dtype=np.int64))
            tensors[name] = np.frombuffer(raw, dtype="<f8", count=size, offset=pos).reshape(dims).copy()
            pos += 8 * size
        (length,) = struct.unpack_from("<Q", raw, pos)
        pos += 8
        meta = json.loads(raw[pos:pos + length].decode("utf-8"))
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: truncated or corrupt checkpoint ({exc})") from None
    return tensors, meta
