"""Float64 tensor arithmetic: layers with backward passes, loss, SGD, checkpoints."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .core import Tensor
from .gradcheck import grad_check
from .layers import (
    LRN,
    Add,
    BatchNorm,
    Concat,
    Conv2D,
    Dense,
    Layer,
    LayerShapeError,
    Pool2D,
    ReLU,
    Softmax,
    cross_entropy,
    softmax,
    softmax_cross_entropy,
)
from .optim import SGD, TrainSchedule, sgd_step

__all__ = [
    "CheckpointError", "load_checkpoint", "save_checkpoint", "Tensor", "grad_check", "LRN", "Add",
    "BatchNorm", "Concat", "Conv2D", "Dense", "Layer", "LayerShapeError", "Pool2D", "ReLU", "Softmax",
    "cross_entropy", "softmax", "softmax_cross_entropy", "SGD", "TrainSchedule", "sgd_step",
]
