"""Datasets, sampling protocols, metrics and threat-model experiments."""

from .dataset import LabeledDataset, Sample
from .experiment import ModelSpec, ProtocolConfig, ThreatModelReport, run_threat_model
from .metrics import Metrics, compute_metrics
from .overlap import derived_count, simulate_overlap
from .splits import balanced_subsample, group_leakage, kfold_split, weighted_test_split

__all__ = [
    "LabeledDataset", "Metrics", "ModelSpec", "ProtocolConfig", "Sample", "ThreatModelReport",
    "balanced_subsample", "compute_metrics", "derived_count", "group_leakage", "kfold_split",
    "run_threat_model", "simulate_overlap", "weighted_test_split",
]
