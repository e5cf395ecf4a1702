"""One-vs-rest linear SVM trained by mini-batch hinge-loss subgradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import argmax_first, check_labels


@dataclass
class LinearModel:
    weights: np.ndarray  # (K, d)
    biases: np.ndarray  # (K,)
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def n_classes(self) -> int:
        return len(self.biases)

    def _prepare(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.mean is not None:
            X = (X - self.mean) / self.scale
        return X

    def decision_function(self, X) -> np.ndarray:
        return self._prepare(X) @ self.weights.T + self.biases

    def predict(self, X) -> np.ndarray:
        return argmax_first(self.decision_function(X))


def hinge_objective(model: LinearModel, X, y, regularization: float) -> float:
    """Sum over classes of reg/2 ||w_k||^2 + mean hinge loss of class k vs rest."""
    y = np.asarray(y)
    scores = model.decision_function(X)
    targets = np.where(y[:, None] == np.arange(model.n_classes)[None, :], 1.0, -1.0)
    hinge = np.maximum(0.0, 1.0 - targets * scores).mean(axis=0)
    return float(np.sum(0.5 * regularization * np.sum(model.weights ** 2, axis=1) + hinge))


def _standardizer(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def train_svm(X, y, epochs: int = 200, lr: float = 0.01, regularization: float = 1e-4,
              batch_size: int = 32, seed: int = 0, standardize: bool = False,
              n_classes: int | None = None) -> LinearModel:
    """Fit K independent binary hinge-loss problems (class k vs the rest).

    Each epoch visits the samples in a seeded random order in mini-batches
    and takes one subgradient step per batch on every class at once.
    """
    X = np.asarray(X, dtype=np.float64)
    y, k = check_labels(y, n_classes)
    n, d = X.shape
    model = LinearModel(np.zeros((k, d)), np.zeros(k))
    if standardize:
        model.mean, model.scale = _standardizer(X)
        X = (X - model.mean) / model.scale
    targets = np.where(y[:, None] == np.arange(k)[None, :], 1.0, -1.0)
    rng = np.random.default_rng(seed)
    batch_size = n if not batch_size else min(batch_size, n)
    W, b = model.weights, model.biases
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, tb = X[idx], targets[idx]
            margins = tb * (xb @ W.T + b)
            active = (margins < 1.0) * (-tb)  # d hinge / d score
            gW = active.T @ xb / len(idx) + regularization * W
            gb = active.mean(axis=0)
            W -= lr * gW
            b -= lr * gb
    return model
