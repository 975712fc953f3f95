"""Bagged Gini decision trees with class-frequency leaves."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .base import PROB_FLOOR, TrainedModel
from ..distribution import floor_and_normalize


@dataclass(frozen=True)
class RFConfig:
    n_trees: int = 100
    max_depth: int = 4
    min_samples_split: int = 32
    seed: int = 0
    prob_floor: float = PROB_FLOOR


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_classes) class frequencies
    n_samples: np.ndarray
    depth: np.ndarray

    def apply(self, X):
        node = np.zeros(len(X), dtype=np.intp)
        for _ in range(int(self.depth.max()) + 1):
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return node

    def predict_proba(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value", "n_samples", "depth")}

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], dtype=np.intp),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.intp),
            np.asarray(d["right"], dtype=np.intp),
            np.asarray(d["value"], dtype=float),
            np.asarray(d["n_samples"], dtype=np.intp),
            np.asarray(d["depth"], dtype=np.intp),
        )


def gini(counts):
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / n[..., None]
    return np.where(n > 0, 1.0 - np.sum(p * p, axis=-1), 0.0)


def best_split(X, Y):
    """Greedy Gini split over every feature and midpoint threshold.

    ``Y`` is the one-hot label matrix of the node. Returns
    ``(feature, threshold)`` or ``None`` when no split lowers impurity.
    """
    n = len(X)
    parent = gini(Y.sum(axis=0)) * n
    best = (parent - 1e-12, None, None)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        valid = np.flatnonzero(xs[:-1] < xs[1:])  # split after position k
        if valid.size == 0:
            continue
        left = np.cumsum(Y[order], axis=0)[valid]
        right = Y.sum(axis=0) - left
        n_left = valid + 1.0
        cost = gini(left) * n_left + gini(right) * (n - n_left)
        k = int(np.argmin(cost))
        if cost[k] < best[0]:
            pos = valid[k]
            thr = 0.5 * (xs[pos] + xs[pos + 1])
            if thr >= xs[pos + 1]:  # midpoint of adjacent floats rounded up
                thr = xs[pos]
            best = (cost[k], f, thr)
    if best[1] is None:
        return None
    return best[1], float(best[2])


def grow_tree(X, Y, max_depth=4, min_samples_split=32) -> Tree:
    feature, threshold, left, right, value, n_samples, depth = [], [], [], [], [], [], []

    def add(rows, d):
        node = len(feature)
        counts = Y[rows].sum(axis=0)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        n_samples.append(len(rows))
        depth.append(d)
        if d >= max_depth or len(rows) < min_samples_split or np.count_nonzero(counts) <= 1:
            return node
        split = best_split(X[rows], Y[rows])
        if split is None:
            return node
        f, thr = split
        mask = X[rows, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node] = add(rows[mask], d + 1)
        right[node] = add(rows[~mask], d + 1)
        return node

    add(np.arange(len(X)), 0)
    return Tree(
        np.asarray(feature, dtype=np.intp),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.intp),
        np.asarray(right, dtype=np.intp),
        np.vstack(value),
        np.asarray(n_samples, dtype=np.intp),
        np.asarray(depth, dtype=np.intp),
    )


def _stack(X, ids):
    X = np.asarray(X, dtype=float)
    if ids is None:
        return X
    return np.hstack([X, np.asarray(ids, dtype=float)])


class RandomForestModel(TrainedModel):
    variant = "random_forest"

    def __init__(self, trees, target="diff", config: RFConfig = RFConfig(), n_features=None, uses_ids=False):
        self.trees = list(trees)
        self.target = target
        self.config = config
        self.n_features = n_features
        self.uses_ids = uses_ids

    @classmethod
    def fit(cls, X, labels, target="diff", ids=None, config: RFConfig = RFConfig()):
        X = np.asarray(X, dtype=float)
        if len(X) < config.min_samples_split:
            raise ValueError(f"random forest needs at least {config.min_samples_split} rows")
        model = cls([], target, config, X.shape[1], ids is not None)
        data = _stack(X, ids)
        Y = np.eye(len(model.classes))[np.asarray(labels) - model.classes[0]]
        rng = np.random.default_rng(config.seed)
        n = len(data)
        for _ in range(config.n_trees):
            sample = rng.integers(0, n, size=n)
            model.trees.append(grow_tree(data[sample], Y[sample], config.max_depth, config.min_samples_split))
        return model

    def raw_proba(self, X, ids=None):
        data = _stack(self._check_width(X), ids if self.uses_ids else None)
        return np.mean([t.predict_proba(data) for t in self.trees], axis=0)

    def predict_proba(self, X, ids=None):
        return floor_and_normalize(self.raw_proba(X, ids), self.config.prob_floor)

    def to_dict(self):
        return {
            "variant": self.variant,
            "format_version": 1,
            "target": self.target,
            "config": asdict(self.config),
            "n_features": self.n_features,
            "uses_ids": self.uses_ids,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls([Tree.from_dict(t) for t in d["trees"]], d["target"], RFConfig(**d["config"]),
                   d["n_features"], d["uses_ids"])


def rf_train(X, labels, target="diff", ids=None, config: RFConfig = RFConfig()) -> RandomForestModel:
    return RandomForestModel.fit(X, labels, target, ids, config)


def rf_predict(model: RandomForestModel, values, ids=None):
    return model.predict_distribution(values, ids)
