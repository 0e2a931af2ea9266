"""The ``ENSW`` parameter container.

Layout, all integers unsigned 32-bit little-endian::

    b"ENSW" | version | record count
    per record: label length | label bytes (utf-8) | dim count | dims... | float64 LE values
    optional trailer: weight count | float64 LE weights

The trailer carries ensemble fusion weights.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"ENSW"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_checkpoint(records: dict[str, np.ndarray], weights=None) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, len(records))]
    for label, arr in records.items():
        raw = label.encode("utf-8")
        arr = np.asarray(arr, dtype="<f8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(np.ascontiguousarray(arr).tobytes())
    if weights is not None:
        w = np.asarray(weights, dtype="<f8")
        out.append(struct.pack("<I", w.size))
        out.append(w.tobytes())
    return b"".join(out)


def decode_checkpoint(data: bytes) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
    view = memoryview(data)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    def u32() -> int:
        return struct.unpack("<I", take(4))[0]

    if bytes(take(4)) != MAGIC:
        raise CheckpointError("not an ENSW checkpoint (bad magic)")
    version = u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    records: dict[str, np.ndarray] = {}
    for _ in range(u32()):
        label = bytes(take(u32())).decode("utf-8")
        ndim = u32()
        dims = tuple(u32() for _ in range(ndim))
        count = int(np.prod(dims, dtype=np.int64))
        arr = np.frombuffer(take(8 * count), dtype="<f8").reshape(dims).astype(np.float64)
        records[label] = arr
    weights = None
    if pos < len(view):
        n = u32()
        weights = np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64)
        if pos != len(view):
            raise CheckpointError("trailing bytes after weight record")
    return records, weights


def save_checkpoint(path, records: dict[str, np.ndarray], weights=None) -> None:
    Path(path).write_bytes(encode_checkpoint(records, weights))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
    return decode_checkpoint(Path(path).read_bytes())
