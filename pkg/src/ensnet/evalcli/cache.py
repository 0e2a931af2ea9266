"""``ENSF`` feature cache: per-item score vectors for one network.

Layout, integers unsigned 32-bit little-endian::

    b"ENSF" | version | id length | id bytes | item count | e
    per item: label | e float64 LE scores
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"ENSF"
VERSION = 1


class CacheError(ValueError):
    pass


@dataclass
class FeatureCache:
    network_id: str
    scores: np.ndarray  # (N, e) float64
    labels: np.ndarray  # (N,) int

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.ndim != 2 or self.scores.shape[0] != len(self.labels):
            raise CacheError(f"scores {self.scores.shape} do not match {len(self.labels)} labels")

    @property
    def e(self) -> int:
        return self.scores.shape[1]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FeatureCache)
            and self.network_id == other.network_id
            and np.array_equal(self.labels, other.labels)
            and self.scores.shape == other.scores.shape
            and self.scores.tobytes() == other.scores.tobytes()
        )


def encode_cache(cache: FeatureCache) -> bytes:
    nid = cache.network_id.encode("utf-8")
    n, e = cache.scores.shape
    rows = np.empty(n, dtype=[("label", "<u4"), ("scores", "<f8", (e,))])
    rows["label"] = cache.labels
    rows["scores"] = cache.scores
    header = MAGIC + struct.pack("<II", VERSION, len(nid)) + nid + struct.pack("<II", n, e)
    return header + rows.tobytes()


def decode_cache(data: bytes) -> FeatureCache:
    if len(data) < 4 or data[:4] != MAGIC:
        raise CacheError("not an ENSF feature cache (bad magic)")
    pos = 4

    def u32() -> int:
        nonlocal pos
        if pos + 4 > len(data):
            raise CacheError("truncated cache header")
        (v,) = struct.unpack_from("<I", data, pos)
        pos += 4
        return v

    version = u32()
    if version != VERSION:
        raise CacheError(f"unsupported cache version {version}")
    id_len = u32()
    if pos + id_len > len(data):
        raise CacheError("truncated cache header")
    nid = data[pos : pos + id_len].decode("utf-8")
    pos += id_len
    n, e = u32(), u32()
    dt = np.dtype([("label", "<u4"), ("scores", "<f8", (e,))])
    expected = n * dt.itemsize
    if len(data) - pos < expected:
        raise CacheError(f"truncated payload: expected {expected} bytes, found {len(data) - pos}")
    if len(data) - pos > expected:
        raise CacheError(f"payload larger than {n} items of dimension {e}")
    rows = np.frombuffer(data, dtype=dt, count=n, offset=pos)
    return FeatureCache(nid, rows["scores"].astype(np.float64), rows["label"].astype(np.int64))


def write_cache(cache: FeatureCache, path) -> None:
    Path(path).write_bytes(encode_cache(cache))


def read_cache(path) -> FeatureCache:
    return decode_cache(Path(path).read_bytes())
