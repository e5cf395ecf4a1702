from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import LengthMismatch

SCORES = ("accuracy", "precision", "recall", "f1", "specificity")


@dataclass
class Metrics:
    """Accuracy plus macro-averaged precision, recall, F1 and specificity."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    specificity: float
    confusion: np.ndarray = field(repr=False)  # rows: true class, columns: predicted
    absent_classes: list = field(default_factory=list)

    def scores(self) -> dict:
        return {k: float(getattr(self, k)) for k in SCORES}

    def to_json(self) -> dict:
        return {**self.scores(), "confusion": self.confusion.tolist(),
                "absent_classes": list(self.absent_classes)}


def compute_metrics(predictions, labels, class_count: int) -> Metrics:
    """Macro averages over all ``class_count`` classes.

    A class with no true samples contributes 0 to every macro average and
    is listed in ``absent_classes``.
    """
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{len(pred)} predictions for {len(true)} labels")
    if len(true) and (true.min() < 0 or true.max() >= class_count or pred.min() < 0 or pred.max() >= class_count):
        raise ValueError("labels and predictions must lie in [0, class_count)")
    cm = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)

    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    fp = predicted - tp
    fn = support - tp
    tn = len(true) - tp - fp - fn

    def ratio(a, b):
        return np.divide(a, b, out=np.zeros_like(a), where=b > 0)

    precision = ratio(tp, predicted)
    recall = ratio(tp, support)
    f1 = ratio(2 * precision * recall, precision + recall)
    specificity = ratio(tn, tn + fp)
    absent = support == 0
    for arr in (precision, recall, f1, specificity):
        arr[absent] = 0.0

    total = cm.sum()
    return Metrics(
        accuracy=float(tp.sum() / total) if total else 0.0,
        precision=float(precision.mean()),
        recall=float(recall.mean()),
        f1=float(f1.mean()),
        specificity=float(specificity.mean()),
        confusion=cm,
        absent_classes=np.flatnonzero(absent).tolist(),
    )


def mean_scores(metrics: list[Metrics]) -> dict:
    return {k: float(np.mean([getattr(m, k) for m in metrics])) for k in SCORES}
