"""One-hidden-layer classifier: logistic hidden units, softmax output, ADAM."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import NonFiniteLoss
from .base import TrainedModel

logger = logging.getLogger(__name__)

HIDDEN_UNITS = 8
PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class NNConfig:
    hidden: int = HIDDEN_UNITS
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 20
    min_delta: float = 1e-4
    validation_fraction: float = 0.1
    seed: int = 0
    min_rows: int = 100


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, X):
    h = sigmoid(X @ params["W1"] + params["b1"])
    return h, softmax(h @ params["W2"] + params["b2"])


def loss_and_grads(params, X, Y):
    """Mean cross entropy against one-hot ``Y`` and its parameter gradients."""
    n = X.shape[0]
    h, p = forward(params, X)
    loss = -np.sum(Y * np.log(np.clip(p, 1e-300, None))) / n
    dz = (p - Y) / n
    dh = dz @ params["W2"].T
    dpre = dh * h * (1.0 - h)
    grads = {
        "W2": h.T @ dz,
        "b2": dz.sum(axis=0),
        "W1": X.T @ dpre,
        "b1": dpre.sum(axis=0),
    }
    return loss, grads


def init_params(n_in, n_hidden, n_out, rng):
    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return {
        "W1": glorot(n_in, n_hidden),
        "b1": np.zeros(n_hidden),
        "W2": glorot(n_hidden, n_out),
        "b2": np.zeros(n_out),
    }


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / c1
            v_hat = self.v[k] / c2
            params[k] = params[k] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


class InputEncoder:
    """z-scores continuous features and one-hot encodes ID columns."""

    def __init__(self, mean, scale, id_sizes=()):
        self.mean = np.asarray(mean, dtype=float)
        self.scale = np.asarray(scale, dtype=float)
        self.id_sizes = tuple(int(s) for s in id_sizes)

    @classmethod
    def fit(cls, X, ids=None):
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        id_sizes = () if ids is None else tuple(int(c) + 1 for c in np.max(ids, axis=0))
        return cls(mean, scale, id_sizes)

    @property
    def width(self):
        return len(self.mean) + sum(self.id_sizes)

    def transform(self, X, ids=None):
        Z = (X - self.mean) / self.scale
        if not self.id_sizes:
            return Z
        blocks = [Z]
        for col, size in enumerate(self.id_sizes):
            codes = np.asarray(ids)[:, col]
            hot = np.zeros((len(codes), size))
            ok = (codes >= 0) & (codes < size)  # unseen categories encode as all zeros
            hot[np.flatnonzero(ok), codes[ok]] = 1.0
            blocks.append(hot)
        return np.hstack(blocks)


class NeuralNetModel(TrainedModel):
    variant = "neural_net"

    def __init__(self, params, encoder: InputEncoder, target="diff", config: NNConfig = NNConfig(), history=None):
        self.params = params
        self.encoder = encoder
        self.target = target
        self.config = config
        self.n_features = len(encoder.mean)
        self.history = history or {}

    @classmethod
    def fit(cls, X, labels, target="diff", ids=None, config: NNConfig = NNConfig(), on_step=None):
        X = np.asarray(X, dtype=float)
        if X.shape[0] < config.min_rows:
            raise ValueError(f"neural net needs at least {config.min_rows} rows, got {X.shape[0]}")
        model = cls(None, InputEncoder.fit(X, ids), target, config)
        classes = model.classes
        y_idx = np.asarray(labels) - classes[0]
        Y = np.eye(len(classes))[y_idx]
        Z = model.encoder.transform(X, ids)
        rng = np.random.default_rng(config.seed)

        n = len(Z)
        perm = rng.permutation(n)
        n_val = int(round(config.validation_fraction * n)) if config.validation_fraction > 0 else 0
        val, train = perm[:n_val], perm[n_val:]

        params = init_params(Z.shape[1], config.hidden, len(classes), rng)
        opt = Adam(params, config.learning_rate, config.beta1, config.beta2, config.eps)
        best = {k: v.copy() for k, v in params.items()}
        best_loss = np.inf
        stale = 0
        losses = []
        step = 0
        epoch = 0
        for epoch in range(1, config.max_epochs + 1):
            order = train[rng.permutation(len(train))]
            for start in range(0, len(order), config.batch_size):
                batch = order[start:start + config.batch_size]
                loss, grads = loss_and_grads(params, Z[batch], Y[batch])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"loss {loss} at epoch {epoch}, step {step}")
                params = opt.step(params, grads)
                step += 1
                if on_step is not None:
                    on_step(step, params)
            monitor = val if n_val else train
            epoch_loss, _ = loss_and_grads(params, Z[monitor], Y[monitor])
            if not np.isfinite(epoch_loss):
                raise NonFiniteLoss(f"monitor loss {epoch_loss} at epoch {epoch}")
            losses.append(float(epoch_loss))
            if epoch_loss < best_loss - config.min_delta:
                best_loss = epoch_loss
                best = {k: v.copy() for k, v in params.items()}
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
        logger.debug("nn stopped after %d epochs, best monitor loss %.5f", epoch, best_loss)
        model.params = best
        model.history = {"epochs": epoch, "monitor_loss": losses, "best_loss": float(best_loss)}
        return model

    def logits(self, X, ids=None):
        Z = self.encoder.transform(self._check_width(X), ids)
        h = sigmoid(Z @ self.params["W1"] + self.params["b1"])
        return h @ self.params["W2"] + self.params["b2"]

    def predict_proba(self, X, ids=None):
        return softmax(self.logits(X, ids))

    def to_dict(self):
        return {
            "variant": self.variant,
            "format_version": 1,
            "target": self.target,
            "config": asdict(self.config),
            "encoder": {"mean": self.encoder.mean.tolist(), "scale": self.encoder.scale.tolist(),
                        "id_sizes": list(self.encoder.id_sizes)},
            "params": {k: self.params[k].tolist() for k in PARAM_NAMES},
        }

    @classmethod
    def from_dict(cls, d):
        enc = d["encoder"]
        params = {k: np.asarray(v, dtype=float) for k, v in d["params"].items()}
        return cls(params, InputEncoder(enc["mean"], enc["scale"], enc["id_sizes"]), d["target"], NNConfig(**d["config"]))


def nn_train(X, labels, target="diff", ids=None, config: NNConfig = NNConfig()) -> NeuralNetModel:
    return NeuralNetModel.fit(X, labels, target, ids, config)


def nn_predict(model: NeuralNetModel, values, ids=None):
    return model.predict_distribution(values, ids)
