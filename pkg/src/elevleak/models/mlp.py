"""Single-hidden-layer perceptron (ReLU, softmax) trained with Adam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergedLoss
from ._common import argmax_first, check_labels, log_softmax, softmax
from .adam import AdamState


@dataclass
class MlpModel:
    params: dict  # W1 (d, h), b1 (h,), W2 (h, K), b2 (K,)
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def hidden(self) -> int:
        return self.params["b1"].shape[0]

    @property
    def n_classes(self) -> int:
        return self.params["b2"].shape[0]

    def _prepare(self, X):
        X = np.asarray(X, dtype=self.params["W1"].dtype)
        if self.mean is not None:
            X = (X - self.mean) / self.scale
        return X

    def logits(self, X) -> np.ndarray:
        return forward(self.params, self._prepare(X))[0]

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.logits(X))

    def predict(self, X) -> np.ndarray:
        return argmax_first(self.logits(X))


def init_params(d: int, hidden: int, k: int, rng: np.random.Generator, dtype=np.float64) -> dict:
    """Glorot-uniform weights, zero biases."""
    lim1 = np.sqrt(6.0 / (d + hidden))
    lim2 = np.sqrt(6.0 / (hidden + k))
    return {
        "W1": rng.uniform(-lim1, lim1, size=(d, hidden)).astype(dtype),
        "b1": np.zeros(hidden, dtype=dtype),
        "W2": rng.uniform(-lim2, lim2, size=(hidden, k)).astype(dtype),
        "b2": np.zeros(k, dtype=dtype),
    }


def forward(params: dict, X: np.ndarray):
    pre = X @ params["W1"] + params["b1"]
    h = np.maximum(pre, 0.0)
    return h @ params["W2"] + params["b2"], (pre, h)


def loss_and_grads(params: dict, X: np.ndarray, y: np.ndarray, alpha: float = 0.0):
    """Mean cross-entropy plus alpha/2 * ||W||^2 over the weight matrices."""
    n = len(y)
    logits, (pre, h) = forward(params, X)
    logp = log_softmax(logits)
    loss = -logp[np.arange(n), y].mean()
    loss += 0.5 * alpha * (np.sum(params["W1"] ** 2) + np.sum(params["W2"] ** 2))

    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    grads = {"W2": h.T @ dlogits + alpha * params["W2"], "b2": dlogits.sum(axis=0)}
    dh = dlogits @ params["W2"].T
    dh[pre <= 0] = 0.0
    grads["W1"] = X.T @ dh + alpha * params["W1"]
    grads["b1"] = dh.sum(axis=0)
    return float(loss), grads


def train_mlp(X, y, hidden: int = 100, epochs: int = 200, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              alpha: float = 1e-4, batch_size: int | None = 200, seed: int = 0,
              standardize: bool = False, n_classes: int | None = None,
              history: list | None = None) -> MlpModel:
    """Minimize softmax cross-entropy with Adam over seeded mini-batches.

    ``batch_size=None`` trains full-batch. Per-epoch mean losses are appended
    to ``history`` when given.
    """
    X = np.asarray(X, dtype=np.float64)
    y, k = check_labels(y, n_classes)
    n, d = X.shape
    rng = np.random.default_rng(seed)
    model = MlpModel(init_params(d, hidden, k, rng))
    if standardize:
        model.mean = X.mean(axis=0)
        model.scale = X.std(axis=0)
        model.scale[model.scale == 0] = 1.0
        X = (X - model.mean) / model.scale
    opt = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    batch_size = n if not batch_size else min(batch_size, n)
    for _ in range(epochs):
        order = rng.permutation(n) if batch_size < n else np.arange(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grads = loss_and_grads(model.params, X[idx], y[idx], alpha)
            if not np.isfinite(loss):
                raise DivergedLoss(f"loss became {loss}")
            opt.update(model.params, grads)
            total += loss * len(idx)
        if history is not None:
            history.append(total / n)
    return model
