"""Route files, tight bounding rectangles and region labelling of raw tracks."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .errors import EmptyTrack, MalformedXml, MissingElevation

GPX_NS = "http://www.topografix.com/GPX/1/1"


@dataclass(frozen=True)
class TrackPoint:
    lat: float
    lon: float
    elevation_m: float
    timestamp: float | None = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if not math.isfinite(self.elevation_m):
            raise ValueError(f"non-finite elevation: {self.elevation_m}")


@dataclass
class Route:
    id: str
    points: list[TrackPoint]

    def __post_init__(self):
        if len(self.points) < 2:
            raise EmptyTrack(f"route {self.id!r} has {len(self.points)} points, need at least 2")

    @property
    def elevations(self) -> list[float]:
        return [p.elevation_m for p in self.points]


@dataclass(frozen=True)
class Rect:
    sw: tuple[float, float]
    ne: tuple[float, float]

    def __post_init__(self):
        if self.sw[0] > self.ne[0] or self.sw[1] > self.ne[1]:
            raise ValueError(f"south-west corner {self.sw} lies beyond north-east corner {self.ne}")

    @property
    def center(self) -> tuple[float, float]:
        return ((self.sw[0] + self.ne[0]) / 2.0, (self.sw[1] + self.ne[1]) / 2.0)

    @property
    def height(self) -> float:
        return self.ne[0] - self.sw[0]

    @property
    def width(self) -> float:
        return self.ne[1] - self.sw[1]

    def contains(self, lat: float, lon: float) -> bool:
        return self.sw[0] <= lat <= self.ne[0] and self.sw[1] <= lon <= self.ne[1]

    @classmethod
    def from_bounds(cls, south: float, west: float, north: float, east: float) -> "Rect":
        return cls((south, west), (north, east))


@dataclass
class Region:
    id: int
    center: tuple[float, float]
    name: str | None = None


# ---------------------------------------------------------------------------
# GPX


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _children(elem, name):
    return [c for c in elem if _local(c.tag) == name]


def _parse_time(text: str) -> float:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def parse_gpx(data: bytes, route_id: str | None = None) -> Route:
    """Parse the track points of a GPX document into a single Route.

    All ``trk/trkseg/trkpt`` elements are concatenated in document order.
    Namespaced (GPX 1.1) and bare documents are both accepted; extensions
    are ignored. The route id falls back to the first ``trk/name`` and then
    to ``"route"``.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc
    if _local(root.tag) != "gpx":
        raise MalformedXml(f"root element is <{_local(root.tag)}>, expected <gpx>")

    points = []
    name = None
    for trk in _children(root, "trk"):
        if name is None:
            names = _children(trk, "name")
            if names and names[0].text:
                name = names[0].text.strip()
        for seg in _children(trk, "trkseg"):
            for pt in _children(seg, "trkpt"):
                index = len(points)
                try:
                    lat = float(pt.attrib["lat"])
                    lon = float(pt.attrib["lon"])
                except (KeyError, ValueError) as exc:
                    raise MalformedXml(f"track point {index} has bad lat/lon") from exc
                ele = _children(pt, "ele")
                if not ele or ele[0].text is None or not ele[0].text.strip():
                    raise MissingElevation(index)
                try:
                    elevation = float(ele[0].text)
                except ValueError as exc:
                    raise MalformedXml(f"track point {index} has bad <ele>") from exc
                times = _children(pt, "time")
                stamp = None
                if times and times[0].text:
                    try:
                        stamp = _parse_time(times[0].text)
                    except ValueError as exc:
                        raise MalformedXml(f"track point {index} has bad <time>") from exc
                try:
                    points.append(TrackPoint(lat, lon, elevation, stamp))
                except ValueError as exc:
                    raise MalformedXml(f"track point {index}: {exc}") from exc

    if not points:
        raise EmptyTrack("document has no track points")
    return Route(route_id or name or "route", points)


def write_gpx(route: Route) -> bytes:
    """Serialize a route as a minimal GPX 1.1 track."""
    ET.register_namespace("", GPX_NS)
    root = ET.Element(f"{{{GPX_NS}}}gpx", {"version": "1.1", "creator": "elevleak"})
    trk = ET.SubElement(root, f"{{{GPX_NS}}}trk")
    ET.SubElement(trk, f"{{{GPX_NS}}}name").text = route.id
    seg = ET.SubElement(trk, f"{{{GPX_NS}}}trkseg")
    for p in route.points:
        pt = ET.SubElement(seg, f"{{{GPX_NS}}}trkpt", {"lat": f"{p.lat:.9f}", "lon": f"{p.lon:.9f}"})
        ET.SubElement(pt, f"{{{GPX_NS}}}ele").text = repr(float(p.elevation_m))
        if p.timestamp is not None:
            stamp = datetime.fromtimestamp(p.timestamp, tz=timezone.utc)
            ET.SubElement(pt, f"{{{GPX_NS}}}time").text = stamp.isoformat().replace("+00:00", "Z")
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


# ---------------------------------------------------------------------------
# Rectangles and regions


def bounding_rect(route: Route | Sequence[TrackPoint]) -> Rect:
    """Tight rectangle: sw = (min lat, min lon), ne = (max lat, max lon)."""
    points = route.points if isinstance(route, Route) else list(route)
    if not points:
        raise EmptyTrack("cannot bound an empty track")
    lats = [p.lat for p in points]
    lons = [p.lon for p in points]
    return Rect((min(lats), min(lons)), (max(lats), max(lons)))


def assign_region(rect: Rect, regions: list[Region], threshold: float = 0.5) -> int:
    """Label ``rect`` with the first region whose center is within ``threshold``.

    Distance is plain Euclidean on (lat, lon) degrees. When nothing is close
    enough a new region centered on ``rect`` is appended to ``regions``.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    clat, clon = rect.center
    for region in regions:
        if math.hypot(clat - region.center[0], clon - region.center[1]) <= threshold:
            return region.id
    region = Region(len(regions), (clat, clon))
    regions.append(region)
    return region.id


def label_routes(routes: Iterable[Route], threshold: float = 0.5,
                 regions: list[Region] | None = None) -> tuple[list[int], list[Region]]:
    """Run region assignment over routes in order; returns (labels, regions)."""
    regions = [] if regions is None else regions
    labels = [assign_region(bounding_rect(r), regions, threshold) for r in routes]
    return labels, regions


def load_region_names(mapping: dict) -> dict[int, str]:
    """Normalize a ``{region_id: name}`` mapping read from JSON (string keys)."""
    return {int(k): str(v) for k, v in mapping.items()}
