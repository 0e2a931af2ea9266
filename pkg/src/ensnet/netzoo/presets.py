"""Preset architecture texts shipped as ``assets/<id>.arch``."""

from __future__ import annotations

from importlib import resources

from ..archdsl import ArchSpec, parse_arch
from ..tensor.optim import TrainSchedule

PRESETS = ("alexnet", "googlenet", "resnet50", "tiny-a", "tiny-g", "tiny-r")

# epochs used when fine-tuning each backbone; tiny variants follow their full-size counterpart
DEFAULT_EPOCHS = {
    "alexnet": 16,
    "googlenet": 20,
    "resnet50": 20,
    "tiny-a": 16,
    "tiny-g": 20,
    "tiny-r": 20,
}

# full-size counterpart for each tiny training vehicle
COUNTERPART = {"tiny-a": "alexnet", "tiny-g": "googlenet", "tiny-r": "resnet50"}


def preset_text(preset_id: str) -> str:
    if preset_id not in PRESETS:
        raise KeyError(f"unknown preset {preset_id!r}; choose from {', '.join(PRESETS)}")
    return resources.files(__package__).joinpath("assets", f"{preset_id}.arch").read_text()


def preset(preset_id: str) -> ArchSpec:
    return parse_arch(preset_text(preset_id))


def default_schedule(preset_id: str, **overrides) -> TrainSchedule:
    if preset_id not in DEFAULT_EPOCHS:
        raise KeyError(f"unknown preset {preset_id!r}")
    return TrainSchedule(**{"epochs": DEFAULT_EPOCHS[preset_id], **overrides})
