"""Simulated route overlap: add derived sub-window samples to every class."""

from __future__ import annotations

import math

import numpy as np

from ..errors import EmptyClass
from .dataset import LabeledDataset, Sample

MIN_WINDOW = 0.7


def derived_count(n_originals: int, ratio: float) -> int:
    """n such that n / (N + n) is closest to ``ratio``."""
    return int(math.floor(ratio * n_originals / (1.0 - ratio) + 0.5))


def simulate_overlap(dataset: LabeledDataset, ratio: float, seed: int = 0, level: str = "city",
                     min_window: float = MIN_WINDOW) -> LabeledDataset:
    """Return ``dataset`` plus derived samples making up ``ratio`` of each class.

    A derived sample is a contiguous window covering at least ``min_window``
    of a randomly chosen source profile of the same class. It keeps the
    source's labels and records the source id.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError("overlap ratio must lie in [0, 1)")
    if ratio == 0.0:
        return LabeledDataset(dataset.samples)
    names = dataset.labels(level)
    rng = np.random.default_rng(seed)
    derived = []
    for cls in sorted(set(names)):
        members = [s for s, n in zip(dataset.samples, names) if n == cls]
        if not members:
            raise EmptyClass(f"class {cls!r} has no samples")
        for j in range(derived_count(len(members), ratio)):
            src = members[int(rng.integers(len(members)))]
            length = len(src.elevations)
            lo = max(2, math.ceil(min_window * length))
            size = int(rng.integers(lo, length + 1)) if lo <= length else length
            start = int(rng.integers(0, length - size + 1))
            derived.append(Sample(f"{src.id}~ov{j:04d}", src.elevations[start:start + size].copy(),
                                  dict(src.labels), "simulated-overlap", src.group, src.spacing))
    return LabeledDataset(list(dataset.samples) + derived)
