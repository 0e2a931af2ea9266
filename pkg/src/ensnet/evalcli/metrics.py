"""Top-k accuracy and rank-vs-accuracy curves.

Classes are ranked by descending score with ties broken toward the smaller
class index, the same rule the arg-max decision uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# published ETH Food-101 top-1/5/10 %, shown next to local results for orientation only
REFERENCE_TOP_K = {
    "Ensemble Net": (72.12, 91.61, 95.95),
}


def true_label_ranks(scores: np.ndarray, labels) -> np.ndarray:
    """0-based rank of each row's true label."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2 or len(labels) != scores.shape[0]:
        raise ValueError("scores must be (N, e) with one label per row")
    e = scores.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= e):
        raise ValueError(f"labels must lie in [0, {e})")
    true = scores[np.arange(len(labels)), labels][:, None]
    cols = np.arange(e)[None, :]
    ahead = (scores > true) | ((scores == true) & (cols < labels[:, None]))
    return ahead.sum(axis=1)


def topk_accuracy(scores: np.ndarray, labels, k: int) -> float:
    """Percentage of rows whose true label is among the ``k`` highest scores."""
    scores = np.asarray(scores)
    if len(scores) == 0:
        raise ValueError("no records to evaluate")
    e = scores.shape[1]
    if not 1 <= k <= e:
        raise ValueError(f"k must lie in [1, {e}], got {k}")
    return 100.0 * float(np.mean(true_label_ranks(scores, labels) < k))


def rank_curve(scores: np.ndarray, labels, max_rank: int) -> list[float]:
    """Top-r accuracy for r = 1..max_rank."""
    scores = np.asarray(scores)
    if len(scores) == 0:
        raise ValueError("no records to evaluate")
    e = scores.shape[1]
    if not 1 <= max_rank <= e:
        raise ValueError(f"rank must lie in [1, {e}], got {max_rank}")
    ranks = true_label_ranks(scores, labels)
    return [100.0 * float(np.mean(ranks < r)) for r in range(1, max_rank + 1)]


@dataclass
class EvalReport:
    rank_accuracy: list[float]
    per_class_top1: dict[int, float]
    count: int
    topk: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "topk": {str(k): round(v, 2) for k, v in self.topk.items()},
            "rank_curve": [{"rank": r, "accuracy": round(a, 2)} for r, a in enumerate(self.rank_accuracy, 1)],
            "per_class_top1": {str(c): round(v, 2) for c, v in sorted(self.per_class_top1.items())},
        }


def evaluate(scores: np.ndarray, labels, topk=(1, 5, 10), max_rank: int | None = None) -> EvalReport:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    e = scores.shape[1]
    max_rank = min(10, e) if max_rank is None else max_rank
    curve = rank_curve(scores, labels, max_rank)
    ranks = true_label_ranks(scores, labels)
    per_class = {int(c): 100.0 * float(np.mean(ranks[labels == c] == 0)) for c in np.unique(labels)}
    return EvalReport(curve, per_class, len(labels), {k: topk_accuracy(scores, labels, k) for k in topk})
