"""Preset architectures, network instantiation, head replacement and training."""

from .network import Network
from .presets import COUNTERPART, DEFAULT_EPOCHS, PRESETS, default_schedule, preset, preset_text
from .training import extract_scores, replace_head, train


def build(preset_id: str, classes: int, seed: int = 0) -> Network:
    """Instantiate a preset network for ``classes`` outputs."""
    return Network.from_spec(preset(preset_id), classes, seed=seed)


__all__ = [
    "Network", "COUNTERPART", "DEFAULT_EPOCHS", "PRESETS", "default_schedule", "preset", "preset_text",
    "extract_scores", "replace_head", "train", "build",
]
