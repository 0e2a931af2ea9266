"""RGB <-> HSV on the 8-bit scale and intensity-only histogram equalization.

Hue is in degrees ``[0, 360)``, saturation in ``[0, 1]`` and value is
``max(R, G, B)`` kept on the integer 0-255 scale, so equalizing V works on
exact 8-bit bins.
"""

from __future__ import annotations

import numpy as np

from .image import Image


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def rgb_to_hsv(rgb) -> np.ndarray:
    """``(..., 3)`` uint8 RGB to ``(..., 3)`` float HSV. Achromatic pixels get H = 0."""
    a = np.asarray(rgb, dtype=np.float64)
    r, g, b = a[..., 0], a[..., 1], a[..., 2]
    v = a.max(axis=-1)
    d = v - a.min(axis=-1)
    safe_d = np.where(d > 0, d, 1.0)
    s = np.where(v > 0, d / np.where(v > 0, v, 1.0), 0.0)
    h = np.where(
        v == r,
        np.mod((g - b) / safe_d, 6.0),
        np.where(v == g, (b - r) / safe_d + 2.0, (r - g) / safe_d + 4.0),
    )
    h = np.where(d > 0, 60.0 * h, 0.0)
    h = np.where(h >= 360.0, h - 360.0, h)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv`, rounded to the nearest uint8."""
    a = np.asarray(hsv, dtype=np.float64)
    h, s, v = a[..., 0], a[..., 1], a[..., 2]
    c = v * s
    hp = np.mod(h, 360.0) / 60.0
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    m = v - c
    sector = np.minimum(np.floor(hp).astype(np.int64), 5)
    zero = np.zeros_like(c)
    # (r', g', b') per 60-degree sector
    table = np.stack(
        [
            np.stack([c, x, zero], -1),
            np.stack([x, c, zero], -1),
            np.stack([zero, c, x], -1),
            np.stack([zero, x, c], -1),
            np.stack([x, zero, c], -1),
            np.stack([c, zero, x], -1),
        ],
        axis=-2,
    )
    rgb1 = np.take_along_axis(table, sector[..., None, None], axis=-2)[..., 0, :]
    out = _round_half_up(rgb1 + m[..., None])
    return np.clip(out, 0, 255).astype(np.uint8)


def intensity_lut(values: np.ndarray) -> np.ndarray | None:
    """256-entry remap table for integer intensities, or None if only one level occurs.

    ``v' = round((cdf(v) - cdf_min) / (N - cdf_min) * 255)``
    """
    v = np.asarray(values).astype(np.int64).ravel()
    hist = np.bincount(v, minlength=256)
    if np.count_nonzero(hist) <= 1:
        return None
    cdf = np.cumsum(hist)
    cdf_min = cdf[hist.nonzero()[0][0]]
    lut = _round_half_up((cdf - cdf_min) / (v.size - cdf_min) * 255.0)
    return np.clip(lut, 0, 255).astype(np.int64)


def equalize_hsv(hsv: np.ndarray) -> np.ndarray:
    """Equalize the V plane of an HSV array; H and S are passed through untouched."""
    lut = intensity_lut(hsv[..., 2])
    if lut is None:
        return hsv.copy()
    out = hsv.copy()
    out[..., 2] = lut[hsv[..., 2].astype(np.int64)]
    return out


def equalize_intensity(img: Image) -> Image:
    """Histogram-equalize intensity only, then convert back to RGB."""
    hsv = rgb_to_hsv(img.pixels)
    if intensity_lut(hsv[..., 2]) is None:
        return img.copy()
    return Image(hsv_to_rgb(equalize_hsv(hsv)))
