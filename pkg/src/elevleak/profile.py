"""The attacker-visible signal: a 1-D elevation sequence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteElevation


@dataclass(frozen=True, eq=False)
class ElevationProfile:
    elevations_m: np.ndarray
    sample_spacing: str | None = None

    def __post_init__(self):
        values = np.asarray(self.elevations_m, dtype=np.float64)
        if values.ndim != 1 or len(values) < 2:
            raise ValueError("an elevation profile needs at least 2 values")
        if not np.all(np.isfinite(values)):
            raise NonFiniteElevation("elevation profile contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "elevations_m", values)

    def __len__(self):
        return len(self.elevations_m)

    def __eq__(self, other):
        if not isinstance(other, ElevationProfile):
            return NotImplemented
        return (self.sample_spacing == other.sample_spacing
                and np.array_equal(self.elevations_m, other.elevations_m))

    __hash__ = None


def as_array(profile) -> np.ndarray:
    """Accept an ElevationProfile or any 1-D sequence of meters."""
    if isinstance(profile, ElevationProfile):
        return profile.elevations_m
    return np.asarray(profile, dtype=np.float64)
