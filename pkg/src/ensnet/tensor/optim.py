from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .core import Tensor


@dataclass(frozen=True)
class TrainSchedule:
    """Epochs, batch size and momentum-SGD settings.

    The learning rate drops by ``decay`` once two thirds of the epochs have run.
    """

    epochs: int = 16
    batch: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    decay: float = 0.1
    jitter: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")
        if self.lr < 0:
            raise ValueError(f"lr must be nonnegative, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")

    def lr_at(self, epoch: int) -> float:
        """Learning rate for a 0-based epoch index."""
        if epoch >= (2 * self.epochs) // 3 and self.epochs >= 3:
            return self.lr * self.decay
        return self.lr

    def with_(self, **kw) -> "TrainSchedule":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, path, **defaults) -> "TrainSchedule":
        """Read a ``{epochs, batch, lr, momentum, seed}`` config file."""
        data = json.loads(Path(path).read_text())
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown schedule keys: {sorted(unknown)}")
        return cls(**{**defaults, **data})


class SGD:
    """Momentum SGD: ``v <- mu * v - lr * g``; ``w <- w + v``."""

    def __init__(self, params: list[Tensor], momentum: float = 0.9):
        self.params = params
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.value) for p in params]

    def step(self, lr: float) -> None:
        for p, v in zip(self.params, self.velocity):
            v *= self.momentum
            v -= lr * p.grad
            p.value += v


def sgd_step(params: list[Tensor], schedule: TrainSchedule, velocity: list[np.ndarray] | None = None):
    """One stateless momentum step; returns the updated velocity buffers."""
    if velocity is None:
        velocity = [np.zeros_like(p.value) for p in params]
    for p, v in zip(params, velocity):
        v *= schedule.momentum
        v -= schedule.lr * p.grad
        p.value += v
    return velocity
