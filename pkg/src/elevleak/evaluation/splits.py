"""Index-level sampling protocols. All functions take labels and return positions."""

from __future__ import annotations

import numpy as np

from ..errors import ClassTooSmall, DegenerateSplit, TooFewSamples


def _classes(labels):
    labels = np.asarray(labels)
    return labels, sorted(set(labels.tolist()))


def kfold_split(labels, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Stratified k folds as sorted position arrays.

    Positions are shuffled within each class, the classes are concatenated
    and the i-th position goes to fold ``i % k``. Fold sizes and per-class
    counts therefore each differ by at most one.
    """
    labels, classes = _classes(labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(labels) < k:
        raise TooFewSamples(f"{len(labels)} samples cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    dealt = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in classes])
    return [np.sort(dealt[i::k]) for i in range(k)]


def balanced_subsample(labels, per_class: int | None = None, seed: int = 0,
                       classes=None) -> np.ndarray:
    """Exactly ``per_class`` seeded-random positions from every class.

    ``per_class=None`` uses the smallest class size. ``classes`` restricts the
    draw to the given labels.
    """
    labels, present = _classes(labels)
    classes = present if classes is None else list(classes)
    sizes = {c: int((labels == c).sum()) for c in classes}
    if per_class is None:
        per_class = min(sizes.values())
    if per_class < 1:
        raise ValueError("per_class must be at least 1")
    for c in classes:
        if sizes[c] < per_class:
            raise ClassTooSmall(c, sizes[c], per_class)
    rng = np.random.default_rng(seed)
    picks = [rng.choice(np.flatnonzero(labels == c), size=per_class, replace=False) for c in classes]
    return np.sort(np.concatenate(picks))


def test_probabilities(labels, test_fraction: float) -> np.ndarray:
    """Per-sample test-selection probability proportional to 1 / class size.

    Scaled so that the expected test size is ``test_fraction * N``; values
    above 1 are clipped.
    """
    labels, classes = _classes(labels)
    n = len(labels)
    sizes = {c: int((labels == c).sum()) for c in classes}
    raw = np.array([1.0 / sizes[c] for c in labels.tolist()])
    return np.minimum(raw * (test_fraction * n / raw.sum()), 1.0)


def weighted_test_split(labels, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) positions; each sample joins the test side independently."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    p = test_probabilities(labels, test_fraction)
    rng = np.random.default_rng(seed)
    is_test = rng.random(len(p)) < p
    test, train = np.flatnonzero(is_test), np.flatnonzero(~is_test)
    if len(test) == 0 or len(train) == 0:
        raise DegenerateSplit(f"split left {len(train)} train and {len(test)} test samples")
    return train, test


def group_leakage(train_groups, test_groups) -> int:
    """Number of test samples whose source route also feeds the training side."""
    seen = set(train_groups)
    return sum(1 for g in test_groups if g in seen)
