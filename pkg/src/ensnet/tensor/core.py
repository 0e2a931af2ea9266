from __future__ import annotations

import numpy as np


class Tensor:
    """A float64 array with a same-shape gradient buffer.

    The gradient is allocated on first access so large frozen networks do not
    pay for it.
    """

    __slots__ = ("value", "_grad")

    def __init__(self, value, grad=None):
        self.value = np.asarray(value, dtype=np.float64)
        if grad is not None:
            grad = np.asarray(grad, dtype=np.float64)
            if grad.shape != self.value.shape:
                raise ValueError(f"grad shape {grad.shape} != value shape {self.value.shape}")
        self._grad = grad

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        return self._grad

    @grad.setter
    def grad(self, g) -> None:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.value.shape:
            raise ValueError(f"grad shape {g.shape} != value shape {self.value.shape}")
        self._grad = g

    def zero_grad(self) -> None:
        if self._grad is not None:
            self._grad.fill(0.0)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def copy(self) -> "Tensor":
        return Tensor(self.value.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"
