"""Top-k metrics, feature caches, reports and the command line."""

from .cache import CacheError, FeatureCache, read_cache, write_cache
from .metrics import REFERENCE_TOP_K, EvalReport, evaluate, rank_curve, topk_accuracy, true_label_ranks

__all__ = [
    "CacheError", "FeatureCache", "read_cache", "write_cache", "REFERENCE_TOP_K", "EvalReport",
    "evaluate", "rank_curve", "topk_accuracy", "true_label_ranks",
]
