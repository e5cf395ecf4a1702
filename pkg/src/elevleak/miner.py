"""Grid-based segment mining.

A city boundary is cut into a grid of cells, every cell is queried for its
top segments, the returned polylines are decoded and each path is augmented
with elevations. ``FixtureClient`` replays recorded responses so a crawl can
run offline.
"""

from __future__ import annotations

import abc
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ClientError, DegenerateBoundary, InvalidCharacter, TruncatedChunk
from .geodata import Rect
from .profile import ElevationProfile

log = logging.getLogger(__name__)

MAX_SEGMENTS_PER_QUERY = 10


@dataclass(frozen=True)
class SegmentPath:
    segment_id: str
    path: list[tuple[float, float]]

    def __post_init__(self):
        if not self.path:
            raise ValueError(f"segment {self.segment_id!r} has an empty path")


@dataclass
class MinedSample:
    segment_id: str
    city_label: str
    profile: ElevationProfile
    borough_label: str | None = None


class ServiceClient(abc.ABC):
    """Segment-exploration plus elevation lookup."""

    @abc.abstractmethod
    def explore(self, boundary: Rect) -> list[SegmentPath]:
        """Return at most ten segments inside ``boundary``."""

    @abc.abstractmethod
    def elevations(self, path: Sequence[tuple[float, float]]) -> list[float]:
        """Return one elevation in meters per path vertex."""


# ---------------------------------------------------------------------------
# Encoded polylines (1e-5 precision, zigzag deltas, 5-bit chunks offset by 63)


def _round_e5(value: float) -> int:
    return int(math.floor(value * 1e5 + 0.5))


def _encode_value(value: int) -> str:
    value = ~(value << 1) if value < 0 else value << 1
    chunks = []
    while value >= 0x20:
        chunks.append(chr((0x20 | (value & 0x1F)) + 63))
        value >>= 5
    chunks.append(chr(value + 63))
    return "".join(chunks)


def encode_polyline(path: Sequence[tuple[float, float]]) -> str:
    out = []
    prev_lat = prev_lon = 0
    for lat, lon in path:
        ilat, ilon = _round_e5(lat), _round_e5(lon)
        out.append(_encode_value(ilat - prev_lat))
        out.append(_encode_value(ilon - prev_lon))
        prev_lat, prev_lon = ilat, ilon
    return "".join(out)


def decode_polyline(encoded: str) -> list[tuple[float, float]]:
    values = []
    shift = result = 0
    for pos, char in enumerate(encoded):
        b = ord(char) - 63
        if not 0 <= b < 64:
            raise InvalidCharacter(char, pos)
        result |= (b & 0x1F) << shift
        shift += 5
        if b < 0x20:
            values.append(~(result >> 1) if result & 1 else result >> 1)
            shift = result = 0
    if shift:
        raise TruncatedChunk("polyline ends inside a chunk")
    if len(values) % 2:
        raise TruncatedChunk("polyline has a latitude without a longitude")

    points = []
    lat = lon = 0
    for i in range(0, len(values), 2):
        lat += values[i]
        lon += values[i + 1]
        points.append((lat / 1e5, lon / 1e5))
    return points


# ---------------------------------------------------------------------------
# Grid


def subdivide_boundary(city: Rect, rows: int, cols: int) -> list[Rect]:
    """Tile ``city`` into rows x cols cells, row-major from the south-west.

    Cell edges are computed once and shared, so neighbours meet exactly and
    the outer edges coincide with the city boundary.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be at least 1")
    if city.height == 0 or city.width == 0:
        raise DegenerateBoundary(f"boundary {city} has zero extent")
    lat_edges = [city.sw[0] + city.height * i / rows for i in range(rows)] + [city.ne[0]]
    lon_edges = [city.sw[1] + city.width * j / cols for j in range(cols)] + [city.ne[1]]
    return [
        Rect((lat_edges[i], lon_edges[j]), (lat_edges[i + 1], lon_edges[j + 1]))
        for i in range(rows)
        for j in range(cols)
    ]


def _mine_cell(client: ServiceClient, index: int, cell: Rect):
    try:
        segments = client.explore(cell)[:MAX_SEGMENTS_PER_QUERY]
    except ClientError as exc:
        raise ClientError(str(exc), cell=index) from exc
    mined = []
    for seg in segments:
        try:
            elevations = client.elevations(seg.path)
        except ClientError as exc:
            log.warning("cell %d: elevation lookup failed for segment %s: %s",
                        index, seg.segment_id, exc)
            continue
        if len(elevations) != len(seg.path) or len(elevations) < 2:
            log.warning("cell %d: segment %s has %d elevations for %d vertices, skipped",
                        index, seg.segment_id, len(elevations), len(seg.path))
            continue
        mined.append((seg, elevations))
    return mined


def mine_city(client: ServiceClient, city: Rect, rows: int = 10, cols: int = 10,
              label: str = "", borough: str | None = None, threads: int = 1,
              failures: list | None = None) -> list[MinedSample]:
    """Crawl every grid cell of ``city`` and return labelled elevation samples.

    A cell whose query raises ``ClientError`` is skipped; the error (carrying
    the cell index) is appended to ``failures`` when a list is supplied.
    Segments seen in an earlier cell are dropped.
    """
    cells = subdivide_boundary(city, rows, cols)

    def run(item):
        index, cell = item
        try:
            return _mine_cell(client, index, cell)
        except ClientError as exc:
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, enumerate(cells)))
    else:
        results = [run(item) for item in enumerate(cells)]

    samples = []
    seen = set()
    for index, result in enumerate(results):
        if isinstance(result, ClientError):
            log.warning("skipping %s", result)
            if failures is not None:
                failures.append(result)
            continue
        for seg, elevations in result:
            if seg.segment_id in seen:
                continue
            seen.add(seg.segment_id)
            samples.append(MinedSample(seg.segment_id, label, ElevationProfile(elevations), borough))
    return samples


# ---------------------------------------------------------------------------
# Offline playback


def _rect_key(rect: Rect) -> tuple:
    return tuple(round(v, 9) for v in (*rect.sw, *rect.ne))


class FixtureClient(ServiceClient):
    """Replays recorded per-cell responses.

    Each fixture document looks like::

        {"cell": 3,
         "boundary": {"sw": [lat, lon], "ne": [lat, lon]},
         "segments": [{"id": "s1", "polyline": "...", "elevations": [...]}],
         "error": null}

    Cells are looked up by boundary; a boundary without a document yields
    no segments. A non-null ``error`` makes ``explore`` raise ``ClientError``.
    Elevations are looked up by the path's polyline encoding.
    """

    def __init__(self, documents: Sequence[dict]):
        self._cells = {}
        self._elevations = {}
        for doc in documents:
            b = doc["boundary"]
            key = _rect_key(Rect(tuple(b["sw"]), tuple(b["ne"])))
            self._cells[key] = doc
            for seg in doc.get("segments", []):
                if seg.get("elevations") is not None:
                    path = decode_polyline(seg["polyline"])
                    self._elevations[encode_polyline(path)] = list(seg["elevations"])

    @classmethod
    def from_directory(cls, directory) -> "FixtureClient":
        docs = []
        for path in sorted(Path(directory).glob("*.json")):
            docs.append(json.loads(path.read_text()))
        return cls(docs)

    def explore(self, boundary: Rect) -> list[SegmentPath]:
        doc = self._cells.get(_rect_key(boundary))
        if doc is None:
            return []
        if doc.get("error"):
            raise ClientError(str(doc["error"]), cell=doc.get("cell"))
        return [SegmentPath(str(s["id"]), decode_polyline(s["polyline"]))
                for s in doc.get("segments", [])[:MAX_SEGMENTS_PER_QUERY]]

    def elevations(self, path):
        try:
            return list(self._elevations[encode_polyline(path)])
        except KeyError:
            raise ClientError("no recorded elevations for path") from None


def record_fixtures(client: ServiceClient, city: Rect, rows: int, cols: int, directory) -> int:
    """Query ``client`` over the grid and write one fixture document per cell."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = 0
    for index, cell in enumerate(subdivide_boundary(city, rows, cols)):
        doc = {"cell": index, "boundary": {"sw": list(cell.sw), "ne": list(cell.ne)},
               "segments": [], "error": None}
        try:
            for seg in client.explore(cell)[:MAX_SEGMENTS_PER_QUERY]:
                try:
                    elev = client.elevations(seg.path)
                except ClientError:
                    elev = None
                doc["segments"].append({"id": seg.segment_id,
                                        "polyline": encode_polyline(seg.path),
                                        "elevations": elev})
        except ClientError as exc:
            doc["error"] = str(exc)
        (directory / f"cell_{index:05d}.json").write_text(json.dumps(doc, indent=1))
        written += 1
    return written
