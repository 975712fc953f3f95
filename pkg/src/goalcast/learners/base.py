"""Common prediction contract and the frequency base model."""

from __future__ import annotations

import numpy as np

from ..distribution import OutcomeDistribution, classes_for, floor_and_normalize
from ..errors import FeatureDimensionMismatch

PROB_FLOOR = 1e-6


class TrainedModel:
    """Mixin: subclasses implement ``predict_proba(X, ids=None)``."""

    variant = "abstract"
    target = "diff"
    n_features = None

    @property
    def classes(self):
        return classes_for(self.target)

    def _check_width(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.n_features is not None and X.shape[1] != self.n_features:
            raise FeatureDimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        return X

    def predict_distribution(self, values, ids=None) -> OutcomeDistribution:
        X = np.asarray(values, dtype=float).reshape(1, -1)
        ids = None if ids is None else np.asarray(ids).reshape(1, -1)
        return OutcomeDistribution(self.classes, self.predict_proba(X, ids)[0])


class BaseModel(TrainedModel):
    """Constant prediction: floored, normalised class frequencies."""

    variant = "base"

    def __init__(self, probs, target="diff"):
        self.target = target
        self.probs = np.asarray(probs, dtype=float)

    @classmethod
    def fit(cls, labels, target="diff", floor=PROB_FLOOR):
        classes = classes_for(target)
        counts = np.bincount(np.asarray(labels) - classes[0], minlength=len(classes)).astype(float)
        if counts.sum() == 0:
            raise ValueError("base model needs at least one label")
        return cls(floor_and_normalize(counts / counts.sum(), floor), target)

    @property
    def distribution(self) -> OutcomeDistribution:
        return OutcomeDistribution(self.classes, self.probs)

    def predict_proba(self, X, ids=None):
        n = np.atleast_2d(np.asarray(X)).shape[0]
        return np.tile(self.probs, (n, 1))

    def to_dict(self):
        return {"variant": self.variant, "format_version": 1, "target": self.target, "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["probs"], d["target"])


def base_model(labels, target="diff", floor=PROB_FLOOR) -> BaseModel:
    return BaseModel.fit(labels, target, floor)
