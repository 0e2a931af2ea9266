from __future__ import annotations

import copy
import logging
import math

import numpy as np

from ..archdsl import infer_shapes
from ..imageprep.geometry import jitter_array
from ..tensor import layers as L
from ..tensor.optim import SGD, TrainSchedule
from .network import Network, he_uniform

log = logging.getLogger(__name__)


def replace_head(net: Network, classes: int, seed: int) -> Network:
    """Copy of ``net`` whose final dense layer is re-initialized with ``classes`` outputs.

    Every other parameter and buffer is copied bitwise.
    """
    if classes < 2:
        raise ValueError(f"class count must be >= 2, got {classes}")
    new = copy.deepcopy(net)
    graph = new.graph
    head = graph.head
    head.attrs["units"] = classes
    graph.classes = classes
    infer_shapes(graph)
    n_in = new.layers[head.index].params["W"].shape[0]
    rng = np.random.default_rng(seed)
    new.layers[head.index] = L.Dense(n_in, classes, weight=he_uniform(rng, (n_in, classes), n_in))
    return new


def _as_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(data, "arrays"):
        return data.arrays()
    x, y = data
    return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64)


def _jitter_batch(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return np.stack([jitter_array(img, int(rng.integers(2**31))) for img in x])


def train(net: Network, data, sched: TrainSchedule) -> tuple[Network, list[float]]:
    """Momentum-SGD training on softmax cross-entropy, in place.

    ``data`` is an ``(x, y)`` pair (x NHWC floats) or anything with an
    ``arrays()`` method. Runs ``epochs * ceil(N / batch)`` steps and returns
    the network with its per-epoch mean loss.
    """
    x, y = _as_arrays(data)
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    if y.min() < 0 or y.max() >= net.classes:
        raise ValueError(f"labels must lie in [0, {net.classes})")
    rng = np.random.default_rng(sched.seed)
    opt = SGD(net.params(), momentum=sched.momentum)
    history = []
    steps = math.ceil(n / sched.batch)
    for epoch in range(sched.epochs):
        lr = sched.lr_at(epoch)
        order = rng.permutation(n)
        total = 0.0
        for b in range(steps):
            idx = order[b * sched.batch : (b + 1) * sched.batch]
            xb = x[idx]
            if sched.jitter:
                xb = _jitter_batch(xb, rng)
            loss = net.loss_and_grad(xb, y[idx], train=True)
            opt.step(lr)
            total += loss * len(idx)
        history.append(total / n)
        log.info("epoch %d/%d loss %.4f lr %g", epoch + 1, sched.epochs, history[-1], lr)
    return net, history


def extract_scores(net: Network, x, batch: int = 64) -> np.ndarray:
    """Per-sample softmax score vectors (inference mode), shape ``(N, e)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1:] != net.input_shape:
        raise ValueError(f"inputs of shape {x.shape[1:]} do not match network input {net.input_shape}")
    out = [net.forward(x[i : i + batch]) for i in range(0, len(x), batch)]
    return np.concatenate(out, axis=0) if out else np.zeros((0, net.classes))
