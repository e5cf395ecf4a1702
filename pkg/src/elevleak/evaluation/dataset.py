"""Labelled elevation datasets and their JSONL file format.

One sample per line::

    {"id": "...", "labels": {"city": "...", "borough": "...", "region": "..."},
     "elevations": [...], "spacing": "...", "provenance": "synthetic",
     "source_id": "..."}

``labels`` only carries the levels a sample has; ``spacing`` and
``source_id`` are omitted when unset. Elevations are written rounded to six
decimal places.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import DataError, MissingLabelLevel
from ..profile import ElevationProfile

PROVENANCES = ("raw", "mined", "synthetic", "simulated-overlap")
LABEL_LEVELS = ("city", "borough", "region")
DECIMALS = 6


@dataclass(eq=False)
class Sample:
    id: str
    elevations: np.ndarray
    labels: dict = field(default_factory=dict)
    provenance: str = "synthetic"
    source_id: str | None = None
    spacing: str | None = None

    def __post_init__(self):
        self.elevations = np.asarray(self.elevations, dtype=np.float64)
        if self.provenance not in PROVENANCES:
            raise DataError(f"sample {self.id}: unknown provenance {self.provenance!r}")
        self.labels = {k: v for k, v in self.labels.items() if v is not None}

    @property
    def profile(self) -> ElevationProfile:
        return ElevationProfile(self.elevations, self.spacing)

    @property
    def group(self) -> str:
        """Id of the original route this sample came from."""
        return self.source_id or self.id

    def to_record(self) -> dict:
        rec = {"id": self.id,
               "labels": {k: self.labels[k] for k in LABEL_LEVELS if k in self.labels},
               "elevations": [round(float(v), DECIMALS) for v in self.elevations]}
        if self.spacing is not None:
            rec["spacing"] = self.spacing
        rec["provenance"] = self.provenance
        if self.source_id is not None:
            rec["source_id"] = self.source_id
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Sample":
        try:
            return cls(str(rec["id"]), rec["elevations"], dict(rec.get("labels", {})),
                       rec.get("provenance", "raw"), rec.get("source_id"), rec.get("spacing"))
        except KeyError as exc:
            raise DataError(f"dataset record lacks field {exc.args[0]!r}") from None


class LabeledDataset(Sequence):
    def __init__(self, samples: Iterable[Sample]):
        self.samples = list(samples)
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DataError(f"duplicate sample ids: {dupes[:5]}")
        self._by_id = {s.id: s for s in self.samples}

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def get(self, sample_id: str) -> Sample | None:
        return self._by_id.get(sample_id)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    def profiles(self) -> list[np.ndarray]:
        return [s.elevations for s in self.samples]

    def labels(self, level: str) -> list:
        missing = [s.id for s in self.samples if level not in s.labels]
        if missing:
            raise MissingLabelLevel(f"{len(missing)} samples lack a {level!r} label (e.g. {missing[0]})")
        return [s.labels[level] for s in self.samples]

    def encode_labels(self, level: str) -> tuple[np.ndarray, list]:
        """Integer labels 0..K-1 following the sorted class names."""
        names = self.labels(level)
        classes = sorted(set(names))
        lookup = {c: i for i, c in enumerate(classes)}
        return np.array([lookup[n] for n in names], dtype=np.int64), classes

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(self.samples[int(i)] for i in indices)

    def filter(self, predicate) -> "LabeledDataset":
        return LabeledDataset(s for s in self.samples if predicate(s))

    def to_jsonl(self) -> bytes:
        lines = [json.dumps(s.to_record(), separators=(",", ":"), ensure_ascii=False) for s in self.samples]
        return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_jsonl()).hexdigest()

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_jsonl())

    @classmethod
    def read(cls, path) -> "LabeledDataset":
        samples = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
                samples.append(Sample.from_record(rec))
        return cls(samples)

    def class_counts(self, level: str) -> dict:
        counts = {}
        for name in self.labels(level):
            counts[name] = counts.get(name, 0) + 1
        return dict(sorted(counts.items()))
