from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Image:
    """8-bit RGB image, pixels stored row-major as ``(h, w, 3)`` uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected an (h, w, 3) array with h, w >= 1, got {px.shape}")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise ValueError("channel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        self.pixels = px

    @property
    def w(self) -> int:
        return self.pixels.shape[1]

    @property
    def h(self) -> int:
        return self.pixels.shape[0]

    def copy(self) -> "Image":
        return Image(self.pixels.copy())

    def __eq__(self, other) -> bool:
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)


def to_input(pixels: np.ndarray) -> np.ndarray:
    """uint8 pixels to float64 network input centred on zero."""
    return np.asarray(pixels, dtype=np.float64) / 255.0 - 0.5
