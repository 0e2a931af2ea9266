"""Binary PPM (P6, maxval 255) reading and writing."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .image import Image


class PPMError(ValueError):
    pass


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    toks: list[bytes] = []
    i = 0
    while len(toks) < count:
        if i >= len(data):
            raise PPMError("truncated PPM header")
        ch = data[i : i + 1]
        if ch == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            toks.append(data[i:j])
            i = j
    # exactly one whitespace byte separates the header from the raster
    return toks, i + 1


def decode_ppm(data: bytes) -> Image:
    toks, start = _header_tokens(data, 4)
    if toks[0] != b"P6":
        raise PPMError(f"only binary P6 images are supported, got {toks[0]!r}")
    try:
        w, h, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise PPMError("malformed PPM header") from exc
    if maxval != 255:
        raise PPMError(f"only maxval 255 is supported, got {maxval}")
    if w < 1 or h < 1:
        raise PPMError(f"bad image size {w}x{h}")
    raster = data[start : start + w * h * 3]
    if len(raster) != w * h * 3:
        raise PPMError("truncated PPM raster")
    return Image(np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3).copy())


def encode_ppm(img: Image) -> bytes:
    return f"P6\n{img.w} {img.h}\n255\n".encode("ascii") + np.ascontiguousarray(img.pixels).tobytes()


def read_ppm(path) -> Image:
    return decode_ppm(Path(path).read_bytes())


def write_ppm(path, img: Image) -> None:
    Path(path).write_bytes(encode_ppm(img))
