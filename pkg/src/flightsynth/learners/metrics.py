"""Classification and regression scores."""
from __future__ import annotations

import numpy as np


class MetricError(ValueError):
    pass


def classification_metrics(predictions, truth, positive="synthetic") -> dict:
    """Accuracy and F1 with ``positive`` as the positive class (F1 = 0 when
    precision + recall = 0)."""
    p = np.asarray(predictions, dtype=object)
    t = np.asarray(truth, dtype=object)
    if len(p) != len(t):
        raise MetricError(f"length mismatch: {len(p)} predictions, {len(t)} labels")
    if len(t) == 0:
        raise MetricError("empty input")
    accuracy = float(np.mean(p == t))
    tp = int(np.sum((p == positive) & (t == positive)))
    fp = int(np.sum((p == positive) & (t != positive)))
    fn = int(np.sum((p != positive) & (t == positive)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"accuracy": accuracy, "f1": f1, "precision": precision, "recall": recall}


def _pair(predictions, truth):
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise MetricError(f"shape mismatch: {p.shape} vs {t.shape}")
    if len(t) == 0:
        raise MetricError("empty input")
    return p, t


def mae(predictions, truth) -> float:
    p, t = _pair(predictions, truth)
    return float(np.mean(np.abs(p - t)))


def rmse(predictions, truth) -> float:
    p, t = _pair(predictions, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def r2(predictions, truth) -> float:
    p, t = _pair(predictions, truth)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise MetricError("R^2 is undefined for zero-variance truth")
    return 1.0 - float(np.sum((p - t) ** 2)) / ss_tot


def regression_metrics(predictions, truth) -> dict:
    return {"mae": mae(predictions, truth), "rmse": rmse(predictions, truth), "r2": r2(predictions, truth)}
