"""Finite-difference verification of the analytic backward passes."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import layers as L

H = 1e-5
# distance from a kink (relu zero, max-pool tie) below which an input is resampled
KINK_MARGIN = 1e-3
MAX_RESAMPLES = 50


def numeric_gradient(f: Callable[[], float], arr: np.ndarray, h: float = H) -> np.ndarray:
    """Central differences of ``f`` w.r.t. every entry of ``arr`` (perturbed in place)."""
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a, n = np.abs(analytic), np.abs(numeric)
    denom = np.maximum(np.maximum(a, n), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def build_layer(config: dict, input_shape: tuple[int, ...], rng: np.random.Generator) -> L.Layer:
    cfg = dict(config)
    kind = cfg.pop("kind")
    if kind == "conv":
        k, q = cfg.get("k", 3), cfg.get("q", 2)
        c_in = input_shape[-1]
        return L.Conv2D(
            k, cfg.get("s", 1), cfg.get("p", 0), c_in, q,
            weight=rng.standard_normal((k, k, c_in, q)), bias=rng.standard_normal(q),
        )
    if kind in ("maxpool", "avgpool"):
        return L.Pool2D(cfg.get("r", 2), cfg.get("s", 2), cfg.get("p", 0), kind[:3])
    if kind == "dense":
        n_in = int(np.prod(input_shape[1:]))
        n_out = cfg.get("units", 3)
        return L.Dense(n_in, n_out, weight=rng.standard_normal((n_in, n_out)), bias=rng.standard_normal(n_out))
    if kind == "relu":
        return L.ReLU()
    if kind == "lrn":
        return L.LRN(**cfg)
    if kind == "batchnorm":
        c = input_shape[-1]
        bn = L.BatchNorm(c)
        bn.params["gamma"].value[:] = rng.uniform(0.5, 1.5, c)
        bn.params["beta"].value[:] = rng.standard_normal(c)
        return bn
    if kind == "softmax":
        return L.Softmax()
    if kind == "add":
        return L.Add()
    if kind == "concat":
        return L.Concat()
    raise ValueError(f"unknown layer kind {kind!r}")


def _near_kink(layer: L.Layer, x: np.ndarray) -> bool:
    if isinstance(layer, L.ReLU):
        return bool(np.min(np.abs(x)) < KINK_MARGIN)
    if isinstance(layer, L.Pool2D) and layer.mode == "max":
        xp = L._pad_hw(x, layer.p, -np.inf)
        n, h, w, c = x.shape
        ho = L._out_side(h, layer.r, layer.s, layer.p)
        wo = L._out_side(w, layer.r, layer.s, layer.p)
        win = L._windows(xp, layer.r, layer.s, ho, wo).reshape(n, ho, wo, c, -1)
        if win.shape[-1] < 2:
            return False
        top2 = np.sort(win, axis=-1)[..., -2:]
        gap = top2[..., 1] - top2[..., 0]
        return bool(np.min(gap[np.isfinite(gap)], initial=np.inf) < KINK_MARGIN)
    return False


def grad_check(config: dict, input_shape: tuple[int, ...], seed: int, h: float = H) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``config`` names the layer (``{"kind": "conv", "k": 3, ...}``); the
    special kind ``"softmax_ce"`` checks the fused softmax + cross-entropy
    gradient w.r.t. the logits. Covers every parameter and input entry.
    """
    if any(d > 8 for d in input_shape):
        raise ValueError("grad_check is meant for small shapes (every dim <= 8)")
    rng = np.random.default_rng(seed)

    if config["kind"] == "softmax_ce":
        logits = rng.standard_normal(input_shape) * 2
        labels = rng.integers(0, input_shape[1], input_shape[0])
        _, analytic, _ = L.softmax_cross_entropy(logits, labels)
        numeric = numeric_gradient(lambda: L.softmax_cross_entropy(logits, labels)[0], logits, h)
        return relative_error(analytic, numeric)

    layer = build_layer(config, input_shape, rng)
    n_inputs = 2 if config["kind"] in ("add", "concat") else 1
    xs = [rng.standard_normal(input_shape) for _ in range(n_inputs)]
    for _ in range(MAX_RESAMPLES):
        if not any(_near_kink(layer, x) for x in xs):
            break
        xs = [x + rng.uniform(-0.1, 0.1, x.shape) for x in xs]
    else:
        raise RuntimeError("could not sample an input away from non-differentiable points")

    def run():
        return layer.forward(xs if n_inputs > 1 else xs[0], train=True)

    upstream = rng.standard_normal(run().shape)

    def objective() -> float:
        return float(np.sum(run() * upstream))

    layer.zero_grad()
    run()
    dx = layer.backward(upstream)
    dxs = dx if n_inputs > 1 else [dx]
    errs = []
    for x, d in zip(xs, dxs):
        errs.append(relative_error(d, numeric_gradient(objective, x, h)))
    analytic_params = {name: t.grad.copy() for name, t in layer.params.items()}
    for name, t in layer.params.items():
        errs.append(relative_error(analytic_params[name], numeric_gradient(objective, t.value, h)))
    return max(errs)
