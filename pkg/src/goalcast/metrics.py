"""Scoring rules: cross entropy (nats) and ranked probability score."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import OutcomeDistribution, class_index
from .errors import ClassOutOfRange, ZeroProbability


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    n: int
    std_err: float

    def to_dict(self):
        return {"name": self.name, "value": self.value, "n": self.n, "std_err": self.std_err}


def cross_entropy(predicted: OutcomeDistribution, true_class: int) -> float:
    q = predicted.probs[class_index(predicted.classes, true_class)]
    if q <= 0:
        raise ZeroProbability(f"zero probability on realised class {true_class}")
    return -math.log(q)


def rps(predicted: OutcomeDistribution, true_class: int) -> float:
    k = class_index(predicted.classes, true_class)
    truth = np.zeros(len(predicted.classes))
    truth[k] = 1.0
    diff = np.cumsum(predicted.probs) - np.cumsum(truth)
    return float(np.sum(diff ** 2) / (len(predicted.classes) - 1))


def cross_entropy_batch(P, y_idx) -> np.ndarray:
    """Per-row cross entropy for a probability matrix and class indices."""
    P = np.asarray(P)
    y_idx = np.asarray(y_idx)
    if np.any(y_idx < 0) or np.any(y_idx >= P.shape[1]):
        raise ClassOutOfRange("class index outside the probability matrix")
    q = P[np.arange(len(y_idx)), y_idx]
    if np.any(q <= 0):
        raise ZeroProbability("zero probability on a realised class")
    return -np.log(q)


def rps_batch(P, y_idx) -> np.ndarray:
    P = np.asarray(P)
    y_idx = np.asarray(y_idx)
    n_c = P.shape[1]
    if np.any(y_idx < 0) or np.any(y_idx >= n_c):
        raise ClassOutOfRange("class index outside the probability matrix")
    truth_cdf = (np.arange(n_c)[None, :] >= y_idx[:, None]).astype(float)
    return np.sum((np.cumsum(P, axis=1) - truth_cdf) ** 2, axis=1) / (n_c - 1)


def confusion_matrix(predictions, classes) -> np.ndarray:
    """Counts indexed ``[predicted][true]`` from (argmax class, true class) pairs."""
    classes = tuple(classes)
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for pred, true in predictions:
        counts[class_index(classes, pred), class_index(classes, true)] += 1
    return counts


def mean_with_stderr(name, values, n=None) -> MetricValue:
    """Mean and standard error of per-fold values."""
    values = np.asarray(values, dtype=float)
    k = len(values)
    se = float(values.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return MetricValue(name, float(values.mean()), k if n is None else n, se)
