"""Image preprocessing: HSV intensity equalization, resizing, jitter, datasets and splits."""

from .color import equalize_intensity, hsv_to_rgb, rgb_to_hsv
from .dataset import (
    DatasetError,
    Item,
    LabeledSet,
    SplitManifest,
    load_dataset,
    make_split,
    write_dataset,
)
from .geometry import fit_to_input, jitter, jitter_array, rescale_max_side, resize
from .image import Image, to_input
from .ppm import PPMError, decode_ppm, encode_ppm, read_ppm, write_ppm
from .synth import class_hues, generate_synthetic

__all__ = [
    "equalize_intensity", "hsv_to_rgb", "rgb_to_hsv", "DatasetError", "Item", "LabeledSet",
    "SplitManifest", "load_dataset", "make_split", "write_dataset", "fit_to_input", "jitter",
    "jitter_array", "rescale_max_side", "resize", "Image", "to_input", "PPMError", "decode_ppm", "encode_ppm", "read_ppm",
    "write_ppm", "class_hues", "generate_synthetic",
]
