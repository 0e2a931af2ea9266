"""Small synthetic image sets that tiny networks can learn.

Each class has its own dominant hue (evenly spaced around the colour
wheel) and stripe frequency; individual images vary in stripe phase and
orientation, hue, brightness and pixel noise.
"""

from __future__ import annotations

import numpy as np

from .color import hsv_to_rgb
from .dataset import Item, LabeledSet
from .image import Image

HUE_JITTER_DEG = 6.0


def class_hues(classes: int) -> np.ndarray:
    return 360.0 * np.arange(classes) / classes


def class_frequencies(classes: int) -> np.ndarray:
    """Stripe cycles across the image for each class."""
    return 1.0 + (np.arange(classes) % 4)


def _render(hue: float, freq: float, size: int, rng: np.random.Generator) -> Image:
    yy, xx = np.mgrid[0:size, 0:size] / size
    theta = rng.uniform(0, np.pi)
    phase = rng.uniform(0, 2 * np.pi)
    wave = np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
    h = np.mod(hue + rng.normal(0, HUE_JITTER_DEG) + 4.0 * wave, 360.0)
    s = np.clip(0.75 + 0.15 * wave, 0, 1)
    v = np.clip(rng.uniform(130, 190) + 50.0 * wave + rng.normal(0, 8, (size, size)), 0, 255)
    hsv = np.stack([h, s, np.floor(v)], axis=-1)
    return Image(hsv_to_rgb(hsv))


def generate_synthetic(classes: int, per_class: int, size: int, seed: int) -> LabeledSet:
    """``classes * per_class`` square RGB images of side ``size``, class-major order."""
    if classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    hues, freqs = class_hues(classes), class_frequencies(classes)
    names = [f"class_{i:02d}" for i in range(classes)]
    items = []
    for label in range(classes):
        for j in range(per_class):
            img = _render(hues[label], freqs[label], size, rng)
            items.append(Item(f"{names[label]}/img_{j:04d}.ppm", label, img))
    return LabeledSet(items, names, size=(size, size))
