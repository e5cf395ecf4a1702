"""Deterministic synthetic geography: Gaussian-hill terrain and random-walk routes.

Stands in for real segment data when testing the attack end to end. Every
output is a pure function of its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evaluation.dataset import DECIMALS, LabeledDataset, Sample
from .geodata import Rect, Route, TrackPoint
from .profile import ElevationProfile


@dataclass(frozen=True)
class Bump:
    lat: float
    lon: float
    sigma: float  # degrees
    height: float  # meters, may be negative


@dataclass(frozen=True)
class TerrainField:
    seed: int = 0
    base: float = 0.0
    amplitude: float = 0.0
    bumps: tuple[Bump, ...] = ()

    @classmethod
    def random(cls, seed: int, boundary: Rect, base: float, amplitude: float,
               n_bumps: int = 12, sigma_range=(0.08, 0.25)) -> "TerrainField":
        """Bumps spread over ``boundary`` (and a margin around it).

        Sigmas are drawn as fractions of the boundary's smaller side; heights
        are uniform in [-amplitude, amplitude].
        """
        rng = np.random.default_rng(seed)
        span = min(boundary.height, boundary.width)
        margin_lat, margin_lon = 0.1 * boundary.height, 0.1 * boundary.width
        bumps = tuple(
            Bump(float(rng.uniform(boundary.sw[0] - margin_lat, boundary.ne[0] + margin_lat)),
                 float(rng.uniform(boundary.sw[1] - margin_lon, boundary.ne[1] + margin_lon)),
                 float(rng.uniform(*sigma_range) * span),
                 float(rng.uniform(-amplitude, amplitude)))
            for _ in range(n_bumps))
        return cls(seed, base, amplitude, bumps)


def terrain_elevation(terrain: TerrainField, lat, lon):
    """base + sum of Gaussian radial kernels h * exp(-d^2 / (2 sigma^2))."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    total = np.full(np.broadcast(lat, lon).shape, terrain.base, dtype=np.float64)
    for b in terrain.bumps:
        d2 = (lat - b.lat) ** 2 + (lon - b.lon) ** 2
        total += b.height * np.exp(-d2 / (2.0 * b.sigma ** 2))
    return total if total.ndim else float(total)


def terrain_gradient(terrain: TerrainField, lat: float, lon: float) -> tuple[float, float]:
    """Analytic (d/dlat, d/dlon) of ``terrain_elevation``."""
    glat = glon = 0.0
    for b in terrain.bumps:
        dlat, dlon = lat - b.lat, lon - b.lon
        k = b.height * math.exp(-(dlat ** 2 + dlon ** 2) / (2.0 * b.sigma ** 2)) / b.sigma ** 2
        glat -= k * dlat
        glon -= k * dlon
    return glat, glon


def _default_step(terrain: TerrainField, boundary: Rect) -> float:
    if terrain.bumps:
        return 0.1 * float(np.median([b.sigma for b in terrain.bumps]))
    return 0.01 * min(boundary.height, boundary.width)


def sample_route(terrain: TerrainField, boundary: Rect, n_points: int, seed: int,
                 step: float | None = None, route_id: str = "route",
                 turn_sd: float = 0.35) -> tuple[Route, ElevationProfile]:
    """Seeded persistent random walk inside ``boundary``.

    The heading drifts by a Gaussian turn each step; a step that would leave
    the boundary is clamped onto it and the heading is reflected.
    """
    if n_points < 2:
        raise ValueError("a route needs at least 2 points")
    rng = np.random.default_rng(seed)
    step = _default_step(terrain, boundary) if step is None else step
    lat = rng.uniform(boundary.sw[0], boundary.ne[0])
    lon = rng.uniform(boundary.sw[1], boundary.ne[1])
    heading = rng.uniform(0.0, 2.0 * math.pi)
    lats, lons = [lat], [lon]
    for _ in range(n_points - 1):
        heading += rng.normal(0.0, turn_sd)
        nlat = lat + step * math.sin(heading)
        nlon = lon + step * math.cos(heading)
        if not boundary.sw[0] <= nlat <= boundary.ne[0]:
            heading = -heading
            nlat = min(max(nlat, boundary.sw[0]), boundary.ne[0])
        if not boundary.sw[1] <= nlon <= boundary.ne[1]:
            heading = math.pi - heading
            nlon = min(max(nlon, boundary.sw[1]), boundary.ne[1])
        lat, lon = nlat, nlon
        lats.append(lat)
        lons.append(lon)
    elev = np.round(terrain_elevation(terrain, np.array(lats), np.array(lons)), DECIMALS)
    route = Route(route_id, [TrackPoint(a, o, float(e)) for a, o, e in zip(lats, lons, elev)])
    return route, ElevationProfile(elev)


@dataclass
class BoroughSpec:
    name: str
    boundary: Rect
    count: int


@dataclass
class CitySpec:
    label: str
    terrain: TerrainField
    boundary: Rect
    count: int = 0
    boroughs: list[BoroughSpec] = field(default_factory=list)


def gen_city_dataset(cities: Sequence[CitySpec], n_points: int = 150, seed: int = 0,
                     return_routes: bool = False):
    """Sample ``count`` routes per city (or per borough when boroughs are given).

    Each route gets its own child seed, so the dataset is a pure function of
    (cities, n_points, seed).
    """
    jobs = []
    for city in cities:
        if city.boroughs:
            for b in city.boroughs:
                jobs.extend((city, b.name, b.boundary) for _ in range(b.count))
        else:
            if city.count < 1:
                raise ValueError(f"city {city.label!r} needs a positive count")
            jobs.extend((city, None, city.boundary) for _ in range(city.count))
    seeds = np.random.SeedSequence(seed).spawn(len(jobs))
    samples, routes = [], []
    per_label = {}
    for (city, borough, boundary), ss in zip(jobs, seeds):
        key = (city.label, borough)
        per_label[key] = per_label.get(key, 0) + 1
        sid = f"{city.label}{'/' + borough if borough else ''}/{per_label[key] - 1:05d}"
        route, profile = sample_route(city.terrain, boundary, n_points,
                                      int(ss.generate_state(1)[0]), route_id=sid)
        samples.append(Sample(sid, profile.elevations_m, {"city": city.label, "borough": borough},
                              "synthetic"))
        routes.append(route)
    data = LabeledDataset(samples)
    return (data, routes) if return_routes else data


def default_cities(n_cities: int = 5, gap: float = 300.0, amplitude: float = 150.0,
                   base: float = 0.0, n_bumps: int = 12, seed: int = 0, count: int = 200,
                   boroughs_per_city: int = 0) -> list[CitySpec]:
    """``n_cities`` square cities side by side with base elevations ``base + i*gap``.

    Each city gets its own random terrain. With ``boroughs_per_city`` the city
    square is split into vertical strips, each a borough with ``count`` routes.
    """
    specs = []
    seeds = np.random.SeedSequence(seed).spawn(n_cities)
    for i in range(n_cities):
        boundary = Rect((40.0, -100.0 + 2.0 * i), (41.0, -99.0 + 2.0 * i))
        terrain = TerrainField.random(int(seeds[i].generate_state(1)[0]), boundary,
                                      base + i * gap, amplitude, n_bumps)
        boroughs = []
        for j in range(boroughs_per_city):
            w = boundary.width / boroughs_per_city
            sub = Rect((boundary.sw[0], boundary.sw[1] + j * w), (boundary.ne[0], boundary.sw[1] + (j + 1) * w))
            boroughs.append(BoroughSpec(f"B{j}", sub, count))
        specs.append(CitySpec(f"C{i}", terrain, boundary, count, boroughs))
    return specs
