"""Image-like encoding: a 32x32 colored line graph per elevation profile.

The y-axis spans each profile's own extremes, so geometry carries only the
shape of the signal. Absolute height is carried by the line color, picked
from a global elevation palette by the profile's mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profile import as_array

SIZE = 32
N_POINTS = 200

_DEFAULT_COLORS = (
    (1.0, 0.0, 0.0),
    (0.0, 0.6, 0.0),
    (0.0, 0.0, 1.0),
    (1.0, 0.8, 0.0),
    (1.0, 0.0, 1.0),
    (0.0, 0.8, 0.8),
    (0.0, 0.0, 0.0),
    (1.0, 0.5, 0.0),
)


@dataclass(frozen=True)
class Palette:
    low: float = -100.0
    high: float = 3000.0
    colors: tuple = _DEFAULT_COLORS

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError("palette range must be increasing")
        if len(set(self.colors)) != len(self.colors):
            raise ValueError("palette colors must be distinct")
        if (1.0, 1.0, 1.0) in self.colors:
            raise ValueError("white is reserved for the background")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.low, self.high, len(self.colors) + 1)

    def bin_of(self, elevation: float) -> int:
        """Bin index; values outside the range clamp to the end bins."""
        k = int(np.searchsorted(self.edges, elevation, side="right")) - 1
        return min(max(k, 0), len(self.colors) - 1)

    def color_of(self, elevation: float) -> tuple:
        return self.colors[self.bin_of(elevation)]


def resample(profile, n: int = N_POINTS) -> np.ndarray:
    """Reduce to ``n`` part means, or linearly upsample shorter profiles."""
    values = as_array(profile)
    length = len(values)
    if length < 2:
        raise ValueError("need at least 2 elevation values")
    if length >= n:
        bounds = (np.arange(n + 1) * length) // n
        sums = np.add.reduceat(values, bounds[:-1])
        return sums / np.diff(bounds)
    return np.interp(np.linspace(0.0, length - 1, n), np.arange(length), values)


def resample_200(profile) -> np.ndarray:
    return resample(profile, N_POINTS)


def _line(x0, y0, x1, y1):
    """Integer Bresenham, all octants, endpoints included."""
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def line_geometry(profile, size: int = SIZE) -> tuple[np.ndarray, np.ndarray]:
    """Pixel columns and rows (row 0 at the top) of the resampled points."""
    values = resample_200(profile)
    n = len(values)
    cols = np.floor(np.arange(n) * (size - 1) / (n - 1) + 0.5).astype(int)
    lo, hi = values.min(), values.max()
    if hi == lo:
        rows = np.full(n, size // 2, dtype=int)
    else:
        rows = np.floor((hi - values) / (hi - lo) * (size - 1) + 0.5).astype(int)
    return cols, rows


def line_mask(profile, size: int = SIZE) -> np.ndarray:
    cols, rows = line_geometry(profile, size)
    mask = np.zeros((size, size), dtype=bool)
    for i in range(len(cols) - 1):
        for x, y in _line(cols[i], rows[i], cols[i + 1], rows[i + 1]):
            mask[y, x] = True
    return mask


def rasterize(profile, palette: Palette | None = None, size: int = SIZE) -> np.ndarray:
    """Render a profile as a channel-major (3, size, size) float image in [0, 1]."""
    palette = palette or Palette()
    values = as_array(profile)
    color = np.asarray(palette.color_of(float(values.mean())), dtype=np.float64)
    mask = line_mask(values, size)
    image = np.ones((3, size, size), dtype=np.float64)
    image[:, mask] = color[:, None]
    return image


def rasterize_many(profiles, palette: Palette | None = None, dtype=np.float64) -> np.ndarray:
    return np.stack([rasterize(p, palette) for p in profiles]).astype(dtype, copy=False)


def to_png(image: np.ndarray, path, scale: int = 8) -> None:
    """Write a (3, H, W) image as an RGB PNG, nearest-neighbour upscaled."""
    from PIL import Image

    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8).transpose(1, 2, 0)
    if scale > 1:
        pixels = pixels.repeat(scale, axis=0).repeat(scale, axis=1)
    Image.fromarray(pixels).save(path, format="PNG")
