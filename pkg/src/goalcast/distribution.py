"""Probability vectors over ordered outcome classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClassOutOfRange
from .features import DIFF_CLASSES, TOTAL_CLASSES

NORMALIZATION_TOL = 1e-9


def classes_for(target: str) -> tuple[int, ...]:
    if target == "diff":
        return DIFF_CLASSES
    if target == "total":
        return TOTAL_CLASSES
    raise ValueError(f"target must be 'diff' or 'total', got {target!r}")


def class_index(classes, value) -> int:
    lo = classes[0]
    k = int(value) - lo
    if not 0 <= k < len(classes) or classes[k] != value:
        raise ClassOutOfRange(f"class {value} outside {classes[0]}..{classes[-1]}")
    return k


def tie_break_argmax(probs, classes) -> int:
    """Index of the most probable class.

    Exact ties go to the class nearest zero, negative before positive.
    """
    probs = np.asarray(probs)
    best = probs.max()
    candidates = np.flatnonzero(probs == best)
    return int(min(candidates, key=lambda k: (abs(classes[k]), classes[k])))


def argmax_classes(P, classes) -> np.ndarray:
    """Row-wise :func:`tie_break_argmax` returning class values."""
    P = np.asarray(P)
    cls = np.asarray(classes)
    # rank classes by tie-break preference, then pick the first maximal one
    order = np.lexsort((cls, np.abs(cls)))
    reordered = P[:, order]
    return cls[order][np.argmax(reordered == reordered.max(axis=1, keepdims=True), axis=1)]


def floor_and_normalize(probs, floor):
    probs = np.maximum(np.asarray(probs, dtype=float), floor)
    return probs / probs.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    classes: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (len(self.classes),):
            raise ValueError(f"expected {len(self.classes)} probabilities, got shape {probs.shape}")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __eq__(self, other):
        return (
            isinstance(other, OutcomeDistribution)
            and self.classes == other.classes
            and np.array_equal(self.probs, other.probs)
        )

    def __getitem__(self, cls) -> float:
        return float(self.probs[class_index(self.classes, cls)])

    def argmax(self) -> int:
        return self.classes[tie_break_argmax(self.probs, self.classes)]

    def mean(self) -> float:
        return float(np.dot(self.probs, self.classes))

    def to_dict(self):
        return {"classes": list(self.classes), "probs": [float(p) for p in self.probs]}
