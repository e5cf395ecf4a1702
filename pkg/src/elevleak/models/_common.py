from __future__ import annotations

import numpy as np

from ..errors import SingleClassDataset


def check_labels(y, n_classes: int | None = None) -> tuple[np.ndarray, int]:
    """Validate integer labels 0..K-1 and return (labels, K)."""
    y = np.asarray(y)
    if y.ndim != 1 or not np.issubdtype(y.dtype, np.integer):
        raise ValueError("labels must be a 1-D integer array")
    if len(y) and y.min() < 0:
        raise ValueError("labels must be non-negative")
    k = int(y.max()) + 1 if n_classes is None else n_classes
    if len(np.unique(y)) < 2 or k < 2:
        raise SingleClassDataset("training data must contain at least two classes")
    return y.astype(np.int64), k


def argmax_first(scores: np.ndarray) -> np.ndarray:
    """Row-wise argmax; numpy already resolves ties to the smallest index."""
    return np.argmax(scores, axis=1)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def inverse_size_weights(y, n_classes: int) -> np.ndarray:
    """weight_k = N / (K * N_k), which averages to 1 over samples.

    K counts only classes present in ``y``; absent classes get weight 0.
    """
    y = np.asarray(y)
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    weights = np.zeros(n_classes)
    present = counts > 0
    weights[present] = len(y) / (int(present.sum()) * counts[present])
    return weights
