"""Threat-model experiment drivers.

TM1 predicts a region from a user's own history, TM2 predicts the borough
inside a known city (one model per city) and TM3 predicts the city. Each
unit of work (the whole dataset, or one city for TM2) is evaluated with one
of three protocols:

``kfold``
    balanced subsample, then stratified k-fold cross-validation; scores are
    averaged over folds.
``weighted_split``
    keep every sample, draw the test side with probabilities inversely
    proportional to class size; CNN loss is optionally class-weighted.
``finetune``
    (CNN only) rounds of balanced subsets trained fewest-classes first;
    k-fold over the all-class round.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError, MissingLabelLevel, SingleClassDataset
from ..imagerep import Palette, rasterize_many
from ..models import (
    RoundParams,
    cnn_train,
    fine_tune,
    inverse_size_weights,
    make_rounds,
    smallest_first_schedule,
    train_mlp,
    train_rfc,
    train_svm,
)
from ..textrep import TextConfig, TextPipeline
from .dataset import LabeledDataset
from .metrics import Metrics, compute_metrics, mean_scores
from .overlap import simulate_overlap
from .splits import balanced_subsample, group_leakage, kfold_split, weighted_test_split

log = logging.getLogger(__name__)

THREAT_MODELS = {"TM1": "region", "TM2": "borough", "TM3": "city"}
REPRESENTATIONS = ("text", "image")
FAMILIES = ("svm", "rfc", "mlp", "cnn")
PROTOCOLS = ("kfold", "weighted_split", "finetune")


@dataclass
class ModelSpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError("model.family", f"unknown model {self.family!r}; expected one of {FAMILIES}")


@dataclass
class ProtocolConfig:
    kind: str = "kfold"
    k: int = 10
    per_class: int | None = None
    classes: list | None = None
    overlap_ratio: float = 0.0
    test_fraction: float = 0.2
    class_weighting: bool = True
    drops: list[int] = field(default_factory=list)
    rounds: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in PROTOCOLS:
            raise ConfigError("protocol.kind", f"unknown protocol {self.kind!r}; expected one of {PROTOCOLS}")


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    dropped: int  # test samples the text codebook could not encode
    leakage: int  # test samples sharing a source route with the training side
    metrics: Metrics


@dataclass
class UnitResult:
    name: str
    classes: list
    per_class: int | None
    folds: list[FoldResult]

    @property
    def aggregate(self) -> dict:
        return mean_scores([f.metrics for f in self.folds])


@dataclass
class ThreatModelReport:
    threat_model: str
    representation: str
    model: ModelSpec
    protocol: ProtocolConfig
    seed: int
    dataset_hash: str
    units: list[UnitResult]
    text: TextConfig | None = None
    palette: Palette | None = None

    @property
    def aggregate(self) -> dict:
        """Scores averaged over units (each unit already averaged over folds)."""
        per_unit = [u.aggregate for u in self.units]
        return {k: float(np.mean([u[k] for u in per_unit])) for k in per_unit[0]}


# ---------------------------------------------------------------------------
# Model dispatch


def fit_predict(spec: ModelSpec, X_train, y_train, X_test, n_classes: int, seed: int,
                class_weights=None, threads: int = 1) -> np.ndarray:
    p = dict(spec.params)
    if spec.family == "svm":
        model = train_svm(X_train, y_train, seed=seed, n_classes=n_classes, **p)
    elif spec.family == "rfc":
        model = train_rfc(X_train, y_train, seed=seed, n_classes=n_classes, threads=threads, **p)
    elif spec.family == "mlp":
        model = train_mlp(X_train, y_train, seed=seed, n_classes=n_classes, **p)
    else:
        if "dtype" in p:
            p["dtype"] = np.dtype(p["dtype"]).type
        model = cnn_train(X_train, y_train, class_weights=class_weights, seed=seed,
                          n_classes=n_classes, **p)
    return model.predict(X_test)


def _check_pairing(representation: str, specs: Sequence[ModelSpec], protocol: ProtocolConfig):
    for spec in specs:
        if representation == "image" and spec.family != "cnn":
            raise ConfigError("model.family", "image representation requires the cnn model")
        if representation == "text" and spec.family == "cnn":
            raise ConfigError("model.family", "the cnn model requires the image representation")
        if protocol.kind == "finetune" and spec.family != "cnn":
            raise ConfigError("protocol.kind", "finetune protocol requires the cnn model")


# ---------------------------------------------------------------------------
# Features


class _Features:
    """Per-fold feature builder shared by every model of one run."""

    def __init__(self, dataset: LabeledDataset, representation: str, text: TextConfig,
                 palette: Palette, image_dtype=np.float32):
        self.dataset = dataset
        self.representation = representation
        self.text = text
        self.images = None
        if representation == "image":
            self.images = rasterize_many(dataset.profiles(), palette, dtype=image_dtype)

    def build(self, train_idx, test_idx):
        """(X_train, X_test, kept_test_idx)."""
        if self.representation == "image":
            return self.images[train_idx], self.images[test_idx], np.asarray(test_idx)
        profiles = self.dataset.profiles()
        pipe = TextPipeline(self.text).fit([profiles[i] for i in train_idx])
        X_train, _ = pipe.transform([profiles[i] for i in train_idx])
        X_test, kept = pipe.transform([profiles[i] for i in test_idx])
        return X_train, X_test, np.asarray(test_idx)[kept]


def _fold_result(fold, y, train_idx, kept_test, n_test, pred, n_classes, groups) -> FoldResult:
    metrics = compute_metrics(pred, y[kept_test], n_classes)
    leak = group_leakage([groups[i] for i in train_idx], [groups[i] for i in kept_test])
    return FoldResult(fold, len(train_idx), len(kept_test), n_test - len(kept_test), leak, metrics)


# ---------------------------------------------------------------------------
# Protocols


def _run_kfold(feats, y, n_classes, specs, protocol, seed, groups, threads):
    idx = balanced_subsample(y, protocol.per_class, seed)
    per_class = len(idx) // n_classes
    folds = kfold_split(y[idx], protocol.k, seed)
    results = {i: [] for i in range(len(specs))}
    for f, fold in enumerate(folds):
        test_idx = idx[fold]
        train_idx = np.setdiff1d(idx, test_idx)
        X_train, X_test, kept = feats.build(train_idx, test_idx)
        for i, spec in enumerate(specs):
            if len(kept):
                pred = fit_predict(spec, X_train, y[train_idx], X_test, n_classes, seed + f, threads=threads)
            else:
                pred = np.zeros(0, dtype=np.int64)
            results[i].append(_fold_result(f, y, train_idx, kept, len(test_idx), pred, n_classes, groups))
            log.info("fold %d/%d %s: accuracy %.4f", f + 1, len(folds), spec.family,
                     results[i][-1].metrics.accuracy)
    return per_class, results


def _run_weighted_split(feats, y, n_classes, specs, protocol, seed, groups, threads):
    train_idx, test_idx = weighted_test_split(y, protocol.test_fraction, seed)
    X_train, X_test, kept = feats.build(train_idx, test_idx)
    weights = None
    if protocol.class_weighting:
        weights = inverse_size_weights(y[train_idx], n_classes)
        weights[weights == 0] = 1.0  # classes missing from the training side carry no samples
    results = {}
    for i, spec in enumerate(specs):
        pred = fit_predict(spec, X_train, y[train_idx], X_test, n_classes, seed,
                           class_weights=weights if spec.family == "cnn" else None, threads=threads)
        results[i] = [_fold_result(0, y, train_idx, kept, len(test_idx), pred, n_classes, groups)]
    return None, results


def _round_params(protocol: ProtocolConfig, spec: ModelSpec, n_rounds: int) -> list[RoundParams]:
    base = {k: spec.params[k] for k in ("epochs", "lr", "batch_size") if k in spec.params}
    if not protocol.rounds:
        return [RoundParams(**base)] * n_rounds
    if len(protocol.rounds) != n_rounds:
        raise ConfigError("protocol.rounds", f"need {n_rounds} entries, got {len(protocol.rounds)}")
    return [RoundParams(**{**base, **r}) for r in protocol.rounds]


def _run_finetune(feats, y, n_classes, specs, protocol, seed, groups, threads):
    schedule = smallest_first_schedule(y, protocol.drops) if protocol.drops else []
    first = make_rounds(y, schedule, seed)[0]
    per_class = first.per_class
    folds = kfold_split(y[first.indices], protocol.k, seed)
    results = {i: [] for i in range(len(specs))}
    for f, fold in enumerate(folds):
        test_idx = first.indices[fold]
        rounds = make_rounds(y, schedule, seed + 1 + f, exclude=test_idx)
        for i, spec in enumerate(specs):
            params = _round_params(protocol, spec, len(rounds))
            extra = {k: spec.params[k] for k in ("c1", "c2") if k in spec.params}
            model = fine_tune(feats.images, y, rounds, params, seed=seed + f, **extra)
            pred = model.predict(feats.images[test_idx])
            train_idx = np.unique(np.concatenate([r.indices for r in rounds]))
            results[i].append(_fold_result(f, y, train_idx, test_idx, len(test_idx), pred, n_classes, groups))
    return per_class, results


_PROTOCOL_RUNNERS = {"kfold": _run_kfold, "weighted_split": _run_weighted_split, "finetune": _run_finetune}


def evaluate_unit(dataset: LabeledDataset, level: str, representation: str, specs: Sequence[ModelSpec],
                  protocol: ProtocolConfig, seed: int = 0, text: TextConfig | None = None,
                  palette: Palette | None = None, name: str = "all", threads: int = 1) -> list[UnitResult]:
    """Evaluate every model in ``specs`` on one dataset; one UnitResult per model."""
    if protocol.overlap_ratio:
        dataset = simulate_overlap(dataset, protocol.overlap_ratio, seed, level)
    if protocol.classes is not None:
        wanted = set(protocol.classes)
        dataset = dataset.filter(lambda s: s.labels.get(level) in wanted)
    y, classes = dataset.encode_labels(level)
    if len(classes) < 2:
        raise SingleClassDataset(f"unit {name!r} has {len(classes)} {level} class(es); need at least 2")
    feats = _Features(dataset, representation, text or TextConfig(), palette or Palette())
    groups = [s.group for s in dataset.samples]
    per_class, results = _PROTOCOL_RUNNERS[protocol.kind](
        feats, y, len(classes), list(specs), protocol, seed, groups, threads)
    return [UnitResult(name, classes, per_class, results[i]) for i in range(len(specs))]


def run_threat_model(tm: str, dataset: LabeledDataset, representation: str,
                     model: ModelSpec | Sequence[ModelSpec], protocol: ProtocolConfig | None = None,
                     seed: int = 0, text: TextConfig | None = None, palette: Palette | None = None,
                     threads: int = 1):
    """Run one threat-model experiment.

    Passing a list of model specs evaluates them all on shared splits and
    features and returns a list of reports, one per spec.
    """
    if tm not in THREAT_MODELS:
        raise ConfigError("threat_model", f"unknown threat model {tm!r}; expected one of {tuple(THREAT_MODELS)}")
    if representation not in REPRESENTATIONS:
        raise ConfigError("representation", f"unknown representation {representation!r}")
    single = isinstance(model, ModelSpec)
    specs = [model] if single else list(model)
    protocol = protocol or ProtocolConfig()
    _check_pairing(representation, specs, protocol)
    text = text or TextConfig()
    palette = palette or Palette()
    level = THREAT_MODELS[tm]
    dataset.labels(level)

    if tm == "TM2":
        try:
            cities = dataset.labels("city")
        except MissingLabelLevel as exc:
            raise MissingLabelLevel(f"TM2 groups by city: {exc}") from None
        units = [(c, dataset.filter(lambda s, c=c: s.labels["city"] == c)) for c in sorted(set(cities))]
    else:
        units = [("all", dataset)]

    per_spec = [[] for _ in specs]
    for name, unit in units:
        log.info("%s unit %s: %d samples", tm, name, len(unit))
        for i, res in enumerate(evaluate_unit(unit, level, representation, specs, protocol, seed,
                                              text, palette, name, threads)):
            per_spec[i].append(res)

    digest = dataset.content_hash()
    reports = [ThreatModelReport(tm, representation, spec, protocol, seed, digest, per_spec[i],
                                 text if representation == "text" else None,
                                 palette if representation == "image" else None)
               for i, spec in enumerate(specs)]
    return reports[0] if single else reports
