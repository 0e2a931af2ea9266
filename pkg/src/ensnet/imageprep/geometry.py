from __future__ import annotations

import numpy as np

from .image import Image

JITTER_UPSCALE = 9 / 8


def _axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centres, clamped at the border
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_array(a: np.ndarray, w: int, h: int) -> np.ndarray:
    """Bilinear resize of an ``(h, w, c)`` float array."""
    if w < 1 or h < 1:
        raise ValueError(f"target size must be positive, got {w}x{h}")
    a = np.asarray(a, dtype=np.float64)
    if a.shape[:2] == (h, w):
        return a.copy()
    y0, y1, fy = _axis_coords(a.shape[0], h)
    x0, x1, fx = _axis_coords(a.shape[1], w)
    fx = fx[None, :, None]
    top = a[y0][:, x0] * (1 - fx) + a[y0][:, x1] * fx
    bot = a[y1][:, x0] * (1 - fx) + a[y1][:, x1] * fx
    fy = fy[:, None, None]
    return top * (1 - fy) + bot * fy


def resize(img: Image, w: int, h: int) -> Image:
    if (img.w, img.h) == (w, h):
        return img.copy()
    out = np.floor(resize_array(img.pixels, w, h) + 0.5)
    return Image(np.clip(out, 0, 255).astype(np.uint8))


def rescale_max_side(img: Image, max_side: int = 512) -> Image:
    """Shrink so the longer side is at most ``max_side``; smaller images are untouched."""
    side = max(img.w, img.h)
    if side <= max_side:
        return img.copy()
    f = max_side / side
    return resize(img, max(1, round(img.w * f)), max(1, round(img.h * f)))


def fit_to_input(img: Image, w: int, h: int) -> Image:
    """Resize the shorter side to the network input, then centre-crop to ``w x h``."""
    f = max(w / img.w, h / img.h)
    rw, rh = max(w, round(img.w * f)), max(h, round(img.h * f))
    big = resize(img, rw, rh)
    x, y = (rw - w) // 2, (rh - h) // 2
    return Image(big.pixels[y : y + h, x : x + w].copy())


def jitter_array(a: np.ndarray, seed: int, size: tuple[int, int] | None = None) -> np.ndarray:
    """Random horizontal flip (p = 0.5) then a random crop from a 9/8-upscaled canvas.

    ``size`` is the crop ``(w, h)``, defaulting to the input size.
    """
    rng = np.random.default_rng(seed)
    a = np.asarray(a, dtype=np.float64)
    h, w = a.shape[:2]
    cw, ch = size if size is not None else (w, h)
    if rng.random() < 0.5:
        a = a[:, ::-1]
    canvas_w, canvas_h = round(w * JITTER_UPSCALE), round(h * JITTER_UPSCALE)
    if cw > canvas_w or ch > canvas_h:
        raise ValueError(f"crop {cw}x{ch} larger than canvas {canvas_w}x{canvas_h}")
    canvas = resize_array(a, canvas_w, canvas_h)
    x = int(rng.integers(0, canvas_w - cw + 1))
    y = int(rng.integers(0, canvas_h - ch + 1))
    return canvas[y : y + ch, x : x + cw].copy()


def jitter(img: Image, seed: int, size: tuple[int, int] | None = None) -> Image:
    out = np.floor(jitter_array(img.pixels, seed, size) + 0.5)
    return Image(np.clip(out, 0, 255).astype(np.uint8))
