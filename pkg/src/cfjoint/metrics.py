from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class MetricSet:
    r2: float
    accuracy: Optional[float] = None
    mean_effect_abs_diff: Optional[float] = None

    def as_dict(self) -> dict:
        return {"r2": self.r2, "accuracy": self.accuracy,
                "mean_effect_abs_diff": self.mean_effect_abs_diff}


def r2(predictions, truths) -> float:
    """Coefficient of determination; negative when worse than the mean."""
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truths, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions, {t.size} truths")
    if t.size < 2:
        raise ValueError("r2 needs at least two points")
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r2 is undefined when all truths are identical")
    return 1.0 - float(np.sum((t - p) ** 2)) / ss_tot


def accuracy(predicted_labels, truths) -> float:
    p = np.asarray(predicted_labels).ravel()
    t = np.asarray(truths).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions, {t.size} truths")
    if t.size == 0:
        raise ValueError("accuracy needs at least one point")
    return float(np.mean(p == t))


def mean_effect_abs_diff(model, X, y_treatment, y_control) -> float:
    """``|mean predicted effect - mean observed (y_t - y_c)|`` over a test set
    that carries both potential outcomes."""
    if y_treatment is None or y_control is None:
        raise ValueError("mean effect difference needs both treatment and control labels")
    yt = np.asarray(y_treatment, dtype=float).ravel()
    yc = np.asarray(y_control, dtype=float).ravel()
    predicted = np.asarray(model.predict_effect(np.asarray(X, dtype=float)))
    return abs(float(predicted.mean()) - float(np.mean(yt - yc)))
