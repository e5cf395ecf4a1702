"""Random forest of Gini decision trees with bootstrap rows and sqrt(d) features per split."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._common import check_labels

LEAF = -1


@dataclass
class Tree:
    """Flat array tree. Node i is a leaf when ``feature[i] == LEAF``.

    Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, K) class histogram of the training rows reaching the node

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.counts[self.apply(X)], axis=1)

    @property
    def n_leaves(self) -> int:
        return int((self.feature == LEAF).sum())


def _best_split(Xn: np.ndarray, yn: np.ndarray, k: int):
    """Best (column, threshold, impurity) over the given columns, or None."""
    n, m = Xn.shape
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    onehot = np.eye(k, dtype=np.float64)[yn[order]]  # (n, m, k)
    left = np.cumsum(onehot, axis=0)[:-1]  # split after position i
    total = left[-1] + onehot[-1]
    right = total - left
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    # n_l * gini_l + n_r * gini_r = n - sum(l^2)/n_l - sum(r^2)/n_r
    cost = n - (left ** 2).sum(axis=2) / n_left - (right ** 2).sum(axis=2) / n_right
    cost[xs[1:] == xs[:-1]] = np.inf
    flat = int(np.argmin(cost))  # row-major: earliest split position, then column order
    pos, col = divmod(flat, m)
    if not np.isfinite(cost[pos, col]):
        return None
    threshold = (xs[pos, col] + xs[pos + 1, col]) / 2.0
    if threshold == xs[pos + 1, col]:  # midpoint rounded up onto the right value
        threshold = xs[pos, col]
    return col, threshold, cost[pos, col]


def build_tree(X: np.ndarray, y: np.ndarray, k: int, max_features: int,
               rng: np.random.Generator, min_samples_leaf: int = 1) -> Tree:
    d = X.shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(rows):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[rows], minlength=k))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        yn = y[rows]
        if len(rows) < 2 * min_samples_leaf or np.all(yn == yn[0]):
            continue
        cols = rng.permutation(d)[:max_features]
        split = _best_split(X[np.ix_(rows, cols)], yn, k)
        if split is None:
            continue
        col, thr, _ = split
        goes_left = X[rows, cols[col]] <= thr
        lrows, rrows = rows[goes_left], rows[~goes_left]
        if len(lrows) < min_samples_leaf or len(rrows) < min_samples_leaf:
            continue
        feature[node] = int(cols[col])
        threshold[node] = float(thr)
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        stack.append((right[node], rrows))
        stack.append((left[node], lrows))

    return Tree(np.array(feature, dtype=np.int64), np.array(threshold),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=np.int64))


@dataclass
class Forest:
    trees: list[Tree]
    n_classes: int

    def tree_predictions(self, X) -> np.ndarray:
        """(n_trees, n_samples) matrix of per-tree class predictions."""
        return np.stack([t.predict(X) for t in self.trees])

    def votes(self, X) -> np.ndarray:
        preds = self.tree_predictions(X)
        votes = np.zeros((preds.shape[1], self.n_classes), dtype=np.int64)
        for row in preds:
            votes[np.arange(len(row)), row] += 1
        return votes

    def predict(self, X) -> np.ndarray:
        """Majority vote; ties go to the smallest class index."""
        return np.argmax(self.votes(X), axis=1)


def train_rfc(X, y, trees: int = 100, seed: int = 0, max_features: int | str = "sqrt",
              min_samples_leaf: int = 1, threads: int = 1, n_classes: int | None = None) -> Forest:
    X = np.asarray(X, dtype=np.float64)
    y, k = check_labels(y, n_classes)
    n, d = X.shape
    if max_features == "sqrt":
        max_features = max(1, int(math.sqrt(d)))
    max_features = min(int(max_features), d)
    seeds = np.random.SeedSequence(seed).spawn(trees)

    def grow(ss):
        rng = np.random.default_rng(ss)
        rows = rng.integers(0, n, size=n)
        return build_tree(X[rows], y[rows], k, max_features, rng, min_samples_leaf)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            grown = list(pool.map(grow, seeds))
    else:
        grown = [grow(ss) for ss in seeds]
    return Forest(grown, k)
