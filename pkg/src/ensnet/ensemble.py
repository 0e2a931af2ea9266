"""Weighted late fusion of per-network score vectors.

The fused feature is the concatenation of ``w_i * F_i`` over the ``eta``
backbones; the fusion head maps it through ReLU and a dense layer of width
``e`` to softmax scores, and the decision is the arg-max class.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .tensor import layers as L
from .tensor.checkpoint import decode_checkpoint, encode_checkpoint
from .tensor.optim import SGD, TrainSchedule

log = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-9
FUSION_EPOCHS = 30
# schedule used to score each candidate during weight search
SEARCH_EPOCHS = 10


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class FusionWeights:
    w: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.w)
        object.__setattr__(self, "w", w)
        if len(w) < 2:
            raise FusionError(f"need at least 2 networks, got {len(w)}")
        if any(v < 0 for v in w):
            raise FusionError(f"weights must be nonnegative: {w}")
        if abs(sum(w) - 1.0) > WEIGHT_SUM_TOL:
            raise FusionError(f"weights must sum to 1, got {sum(w):.12g}")

    @property
    def eta(self) -> int:
        return len(self.w)

    def __iter__(self):
        return iter(self.w)


def _as_weights(w) -> FusionWeights:
    return w if isinstance(w, FusionWeights) else FusionWeights(tuple(w))


def fuse(features, w) -> np.ndarray:
    """Concatenate ``w_i * F_i``.

    ``features`` is a list of ``eta`` arrays, each ``(e,)`` or ``(N, e)``;
    the result is ``(e * eta,)`` or ``(N, e * eta)``.
    """
    w = _as_weights(w)
    feats = [np.asarray(f, dtype=np.float64) for f in features]
    if len(feats) != w.eta:
        raise FusionError(f"{len(feats)} feature blocks for {w.eta} weights")
    shapes = {f.shape for f in feats}
    if len(shapes) != 1:
        raise FusionError(f"feature blocks disagree in shape: {sorted(shapes)}")
    return np.concatenate([wi * f for wi, f in zip(w, feats)], axis=-1)


class FusionModel:
    """Fusion weights plus the ReLU -> dense(e * eta -> e) -> softmax head."""

    def __init__(self, weights, classes: int, seed: int = 0, head: L.Dense | None = None):
        self.weights = _as_weights(weights)
        self.classes = classes
        width = classes * self.weights.eta
        if head is None:
            rng = np.random.default_rng(seed)
            limit = np.sqrt(6.0 / width)
            head = L.Dense(width, classes, weight=rng.uniform(-limit, limit, (width, classes)))
        if head.params["W"].shape != (width, classes):
            raise FusionError(f"head must map {width} -> {classes}, got {head.params['W'].shape}")
        self.head = head
        self._relu = L.ReLU()

    @property
    def eta(self) -> int:
        return self.weights.eta

    @property
    def input_width(self) -> int:
        return self.classes * self.eta

    def logits(self, fused: np.ndarray) -> np.ndarray:
        fused = np.atleast_2d(np.asarray(fused, dtype=np.float64))
        if fused.shape[1] != self.input_width:
            raise FusionError(f"fused width {fused.shape[1]} != e * eta = {self.input_width}")
        return self.head.forward(self._relu.forward(fused))

    def backward(self, dlogits: np.ndarray) -> None:
        self._relu.backward(self.head.backward(dlogits))

    def scores(self, features) -> np.ndarray:
        """Softmax scores for per-network score matrices ``[(N, e), ...]``."""
        return L.softmax(self.logits(fuse(features, self.weights)))

    def to_bytes(self) -> bytes:
        p = self.head.params
        return encode_checkpoint({"fusion/head.W": p["W"].value, "fusion/head.b": p["b"].value}, self.weights.w)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FusionModel":
        records, weights = decode_checkpoint(data)
        if weights is None:
            raise FusionError("checkpoint has no fusion weight record")
        W, b = records["fusion/head.W"], records["fusion/head.b"]
        return cls(FusionWeights(tuple(weights)), W.shape[1], head=L.Dense(*W.shape, weight=W, bias=b))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "FusionModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def ensemble_forward(fused, model: FusionModel) -> np.ndarray:
    """ReLU, dense to ``e``, softmax. A 1-D input gives a 1-D score vector."""
    fused = np.asarray(fused, dtype=np.float64)
    out = L.softmax(model.logits(fused))
    return out[0] if fused.ndim == 1 else out


def predict(scores) -> int:
    """1-based class id of the largest score; ties go to the smallest index."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise FusionError("cannot predict from an empty score vector")
    return int(np.argmax(s)) + 1


def predict_labels(scores: np.ndarray) -> np.ndarray:
    """0-based arg-max label per row (same tie rule as :func:`predict`)."""
    return np.argmax(np.asarray(scores), axis=-1)


def _check_rows(features, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    for i, f in enumerate(features):
        if np.asarray(f).shape[0] != len(labels):
            raise FusionError(f"score matrix {i} has {np.asarray(f).shape[0]} rows for {len(labels)} labels")
    return labels


def default_fusion_schedule(**overrides) -> TrainSchedule:
    return TrainSchedule(**{"epochs": FUSION_EPOCHS, "batch": 32, "lr": 0.1, "momentum": 0.9, **overrides})


def train_fusion(features, labels, weights, sched: TrainSchedule | None = None) -> tuple[FusionModel, list[float]]:
    """Train only the fusion head by cross-entropy momentum SGD; ``weights`` stay fixed."""
    sched = sched or default_fusion_schedule()
    labels = _check_rows(features, labels)
    n = len(labels)
    if n == 0:
        raise FusionError("no training rows")
    classes = np.asarray(features[0]).shape[1]
    model = FusionModel(weights, classes, seed=sched.seed)
    x = fuse(features, model.weights)
    rng = np.random.default_rng(sched.seed)
    opt = SGD(list(model.head.params.values()), momentum=sched.momentum)
    history = []
    for epoch in range(sched.epochs):
        lr = sched.lr_at(epoch)
        order = rng.permutation(n)
        total = 0.0
        for b in range(0, n, sched.batch):
            idx = order[b : b + sched.batch]
            model.head.zero_grad()
            loss, dz, _ = L.softmax_cross_entropy(model.logits(x[idx]), labels[idx])
            model.backward(dz)
            opt.step(lr)
            total += loss * len(idx)
        history.append(total / n)
    return model, history


def simplex_grid(eta: int, step: float) -> list[tuple[float, ...]]:
    """All weight vectors with entries in {0, step, ..., 1} summing to 1, lexicographic order."""
    if not 0 < step <= 1:
        raise FusionError(f"step must lie in (0, 1], got {step}")
    frac = Fraction(step).limit_denominator(10_000)
    if abs(float(frac) - step) > 1e-12 or frac.numerator != 1:
        raise FusionError(f"step {step} must divide 1 evenly")
    n = frac.denominator
    grid = [
        tuple(c / n for c in combo)
        for combo in itertools.product(range(n + 1), repeat=eta)
        if sum(combo) == n
    ]
    return sorted(grid)


def top1(scores: np.ndarray, labels) -> float:
    return float(np.mean(predict_labels(scores) == np.asarray(labels)))


def search_weights(
    val_features,
    labels,
    step: float = 0.1,
    train_features=None,
    train_labels=None,
    sched: TrainSchedule | None = None,
) -> tuple[FusionWeights, list[tuple[tuple[float, ...], float]]]:
    """Grid search over the weight simplex.

    For every candidate a fresh head is trained (on ``train_features`` when
    given, else on the validation rows) with a fixed short schedule and
    seed, then scored by validation top-1. Ties go to the lexicographically
    smallest weight vector. Returns the winner and every (w, top-1) pair.
    """
    labels = _check_rows(val_features, labels)
    if len(labels) == 0:
        raise FusionError("empty validation set")
    if train_features is None:
        train_features, train_labels = val_features, labels
    sched = sched or default_fusion_schedule(epochs=SEARCH_EPOCHS)
    results = []
    best, best_acc = None, -1.0
    for w in simplex_grid(len(val_features), step):
        model, _ = train_fusion(train_features, train_labels, w, sched)
        acc = top1(model.scores(val_features), labels)
        results.append((w, acc))
        log.debug("weights %s -> top-1 %.4f", w, acc)
        if acc > best_acc:
            best, best_acc = w, acc
    return FusionWeights(best), results
