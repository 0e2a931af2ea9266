"""Primitive layers with forward and backward passes.

Activations are NHWC ``(batch, h, w, c)`` or ``(batch, features)`` float64
arrays. Each layer caches what its backward pass needs during ``forward``;
``backward`` takes the upstream gradient, accumulates parameter gradients
into ``Tensor.grad`` and returns the input gradient(s).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Tensor

LRN_SIZE = 5
LRN_ALPHA = 1e-4
LRN_BETA = 0.75
LRN_K = 2.0
BN_EPS = 1e-5
BN_MOMENTUM = 0.9


class LayerShapeError(ValueError):
    pass


def _out_side(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


def _pad_hw(x: np.ndarray, p: int, value: float = 0.0) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)), constant_values=value)


def _windows(xp: np.ndarray, k: int, s: int, ho: int, wo: int) -> np.ndarray:
    """(N, ho, wo, C, k, k) strided view of the padded input."""
    v = sliding_window_view(xp, (k, k), axis=(1, 2))
    return v[:, : (ho - 1) * s + 1 : s, : (wo - 1) * s + 1 : s]


def _scatter_windows(dwin: np.ndarray, shape, k: int, s: int) -> np.ndarray:
    """Adjoint of :func:`_windows`: sum (N, ho, wo, k, k, C) window grads into a padded input."""
    n, ho, wo = dwin.shape[:3]
    dxp = np.zeros(shape)
    for i in range(k):
        for j in range(k):
            dxp[:, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s, :] += dwin[:, :, :, i, j, :]
    return dxp


class Layer:
    params: dict[str, Tensor]
    buffers: dict[str, np.ndarray]

    def __init__(self) -> None:
        self.params = {}
        self.buffers = {}

    def forward(self, x, train: bool = False):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()


class Conv2D(Layer):
    """Cross-correlation with bias. Weights are ``(k, k, c_in, q)``."""

    def __init__(self, k: int, s: int, p: int, c_in: int, q: int, weight=None, bias=None):
        super().__init__()
        self.k, self.s, self.p = k, s, p
        w = np.zeros((k, k, c_in, q)) if weight is None else weight
        b = np.zeros(q) if bias is None else bias
        self.params = {"W": Tensor(w), "b": Tensor(b)}

    def forward(self, x, train=False):
        n, h, w, c = x.shape
        k, s, p = self.k, self.s, self.p
        W = self.params["W"].value
        if W.shape[2] != c:
            raise LayerShapeError(f"conv expects {W.shape[2]} input channels, got {c}")
        ho, wo = _out_side(h, k, s, p), _out_side(w, k, s, p)
        if ho <= 0 or wo <= 0:
            raise LayerShapeError(f"conv output size {ho}x{wo} is not positive")
        xp = _pad_hw(x, p)
        cols = _windows(xp, k, s, ho, wo).transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, k * k * c)
        out = cols @ W.reshape(k * k * c, -1) + self.params["b"].value
        self._cache = (x.shape, xp.shape, cols, ho, wo)
        return out.reshape(n, ho, wo, -1)

    def backward(self, dout):
        xshape, xpshape, cols, ho, wo = self._cache
        n, _, _, c = xshape
        k, s, p = self.k, self.s, self.p
        W = self.params["W"]
        q = W.shape[3]
        d2 = dout.reshape(-1, q)
        W.grad += (cols.T @ d2).reshape(W.shape)
        self.params["b"].grad += d2.sum(axis=0)
        dcols = (d2 @ W.value.reshape(k * k * c, q).T).reshape(n, ho, wo, k, k, c)
        dxp = _scatter_windows(dcols, xpshape, k, s)
        if p:
            dxp = dxp[:, p:-p, p:-p, :]
        return dxp


class Pool2D(Layer):
    """Max or average pooling with window ``r``, stride ``s``, padding ``p``.

    Max pooling pads with -inf and routes the gradient to the first maximum
    in row-major scan order; average pooling pads with zeros and always
    divides by ``r * r``.
    """

    def __init__(self, r: int, s: int, p: int = 0, mode: str = "max"):
        super().__init__()
        if mode not in ("max", "avg"):
            raise ValueError(f"unknown pooling mode {mode!r}")
        if mode == "max" and p >= r:
            raise ValueError("max-pool padding must be smaller than the window")
        self.r, self.s, self.p, self.mode = r, s, p, mode

    def forward(self, x, train=False):
        n, h, w, c = x.shape
        r, s, p = self.r, self.s, self.p
        ho, wo = _out_side(h, r, s, p), _out_side(w, r, s, p)
        if ho <= 0 or wo <= 0:
            raise LayerShapeError(f"pool output size {ho}x{wo} is not positive")
        xp = _pad_hw(x, p, -np.inf if self.mode == "max" else 0.0)
        win = _windows(xp, r, s, ho, wo).reshape(n, ho, wo, c, r * r)
        if self.mode == "max":
            arg = win.argmax(axis=-1)
            out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
            self._cache = (xp.shape, arg, ho, wo)
        else:
            out = win.sum(axis=-1) / (r * r)
            self._cache = (xp.shape, None, ho, wo)
        return out

    def backward(self, dout):
        xpshape, arg, ho, wo = self._cache
        r, s, p = self.r, self.s, self.p
        if self.mode == "max":
            idx = np.arange(r * r).reshape(r, r)
            dwin = (arg[:, :, :, None, None, :] == idx[None, None, None, :, :, None]) * dout[
                :, :, :, None, None, :
            ]
        else:
            dwin = np.broadcast_to(dout[:, :, :, None, None, :] / (r * r), dout.shape[:3] + (r, r, dout.shape[3]))
        dxp = _scatter_windows(dwin, xpshape, r, s)
        if p:
            dxp = dxp[:, p:-p, p:-p, :]
        return dxp


class Dense(Layer):
    """Affine map on the flattened input; weights are ``(in, out)``."""

    def __init__(self, n_in: int, n_out: int, weight=None, bias=None):
        super().__init__()
        w = np.zeros((n_in, n_out)) if weight is None else weight
        b = np.zeros(n_out) if bias is None else bias
        self.params = {"W": Tensor(w), "b": Tensor(b)}

    def forward(self, x, train=False):
        flat = x.reshape(x.shape[0], -1)
        W = self.params["W"].value
        if flat.shape[1] != W.shape[0]:
            raise LayerShapeError(f"dense expects {W.shape[0]} inputs, got {flat.shape[1]}")
        self._cache = (x.shape, flat)
        return flat @ W + self.params["b"].value

    def backward(self, dout):
        xshape, flat = self._cache
        self.params["W"].grad += flat.T @ dout
        self.params["b"].grad += dout.sum(axis=0)
        return (dout @ self.params["W"].value.T).reshape(xshape)


class ReLU(Layer):
    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0)


def _channel_window_sum(a: np.ndarray, size: int) -> np.ndarray:
    half = size // 2
    c = a.shape[-1]
    padded = np.pad(a, [(0, 0)] * (a.ndim - 1) + [(half, half)])
    out = np.zeros_like(a)
    for o in range(size):
        out += padded[..., o : o + c]
    return out


class LRN(Layer):
    """Cross-channel local response normalization.

    ``y_c = x_c / (k + alpha * sum_{|c'-c| <= n//2} x_{c'}^2) ** beta``
    """

    def __init__(self, size: int = LRN_SIZE, alpha: float = LRN_ALPHA, beta: float = LRN_BETA, k: float = LRN_K):
        super().__init__()
        self.size, self.alpha, self.beta, self.k = size, alpha, beta, k

    def forward(self, x, train=False):
        scale = self.k + self.alpha * _channel_window_sum(x * x, self.size)
        self._cache = (x, scale)
        return x * scale**-self.beta

    def backward(self, dout):
        x, scale = self._cache
        t = dout * x * scale ** (-self.beta - 1)
        return dout * scale**-self.beta - 2 * self.alpha * self.beta * x * _channel_window_sum(t, self.size)


class BatchNorm(Layer):
    """Per-channel batch normalization over every axis except the last."""

    def __init__(self, c: int, eps: float = BN_EPS, momentum: float = BN_MOMENTUM):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.params = {"gamma": Tensor(np.ones(c)), "beta": Tensor(np.zeros(c))}
        self.buffers = {"running_mean": np.zeros(c), "running_var": np.ones(c)}

    def forward(self, x, train=False):
        axes = tuple(range(x.ndim - 1))
        gamma, beta = self.params["gamma"].value, self.params["beta"].value
        if train:
            if x.shape[0] < 2:
                raise ValueError("batch norm in train mode needs a batch of at least 2")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.buffers["running_mean"] = m * self.buffers["running_mean"] + (1 - m) * mean
            self.buffers["running_var"] = m * self.buffers["running_var"] + (1 - m) * var
        else:
            mean, var = self.buffers["running_mean"], self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, train, axes)
        return gamma * xhat + beta

    def backward(self, dout):
        xhat, inv_std, train, axes = self._cache
        gamma = self.params["gamma"]
        self.params["beta"].grad += dout.sum(axis=axes)
        gamma.grad += (dout * xhat).sum(axis=axes)
        dxhat = dout * gamma.value
        if not train:
            return dxhat * inv_std
        m = xhat.size // xhat.shape[-1]
        return (inv_std / m) * (
            m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes)
        )


class Concat(Layer):
    """Channel-axis concatenation of several inputs."""

    def forward(self, xs, train=False):
        self._sizes = [x.shape[-1] for x in xs]
        return np.concatenate(xs, axis=-1)

    def backward(self, dout):
        cuts = np.cumsum(self._sizes)[:-1]
        return np.split(dout, cuts, axis=-1)


class Add(Layer):
    """Elementwise sum, used for residual shortcuts."""

    def forward(self, xs, train=False):
        shapes = {x.shape for x in xs}
        if len(shapes) != 1:
            raise LayerShapeError(f"add inputs disagree on shape: {shapes}")
        out = xs[0].copy()
        for x in xs[1:]:
            out += x
        self._n = len(xs)
        return out

    def backward(self, dout):
        return [dout] * self._n


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    if z.shape[-1] == 0:
        raise ValueError("softmax of an empty row")
    z = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


class Softmax(Layer):
    def forward(self, x, train=False):
        self._y = softmax(x.reshape(x.shape[0], -1))
        return self._y

    def backward(self, dout):
        y = self._y
        return y * (dout - (dout * y).sum(axis=-1, keepdims=True))


def cross_entropy(probs: np.ndarray, labels) -> float:
    """Mean negative log-likelihood; probabilities are clamped below at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (probs.shape[0],):
        raise ValueError("labels must have one entry per row")
    e = probs.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= e):
        raise ValueError(f"label out of range [0, {e})")
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-12))))


def softmax_cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss, gradient w.r.t. the logits ``(p - onehot) / batch``, and the probabilities."""
    probs = softmax(logits)
    loss = cross_entropy(probs, labels)
    grad = probs.copy()
    grad[np.arange(len(labels)), labels] -= 1.0
    return loss, grad / len(labels), probs
