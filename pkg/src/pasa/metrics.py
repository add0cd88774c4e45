"""Prediction metrics for the model-building workflow."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, SchemaError, UndefinedAUCError


def _labels(labels, n: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise SchemaError(f"labels have shape {labels.shape}, scores have {n} entries")
    if np.any((labels != 0) & (labels != 1)):
        raise SchemaError("labels must be 0 or 1")
    return labels.astype(bool)


def auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied scores count one half via midranks."""
    scores = np.asarray(scores, dtype=float).ravel()
    pos = _labels(labels, scores.shape[0])
    n1 = int(pos.sum())
    n0 = pos.size - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores, method="average")
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def predict_labels(scores, cutoff: float) -> np.ndarray:
    if not 0.0 < cutoff < 1.0:
        raise ConfigError(f"cutoff must lie in (0, 1), got {cutoff}")
    return np.asarray(scores, dtype=float) > cutoff


def confusion_counts(scores, labels, cutoff: float) -> dict[str, int]:
    """False negatives, false positives and their total at ``score > cutoff``."""
    yhat = predict_labels(scores, cutoff)
    y = _labels(labels, yhat.shape[0])
    fn = int(np.sum(y & ~yhat))
    fp = int(np.sum(~y & yhat))
    return {"FN": fn, "FP": fp, "F": fn + fp}


def corrections(scores_a, scores_b, labels, cutoff: float) -> int:
    """Rows mispredicted by model A that model B gets right."""
    a = predict_labels(scores_a, cutoff)
    b = predict_labels(scores_b, cutoff)
    y = _labels(labels, a.shape[0])
    return int(np.sum((a != y) & (b == y)))
