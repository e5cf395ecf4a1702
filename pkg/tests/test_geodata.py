import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elevleak.errors import EmptyTrack, MalformedXml, MissingElevation
from elevleak.geodata import (
    Rect, Region, Route, TrackPoint, assign_region, bounding_rect, label_routes, parse_gpx, write_gpx,
)

GPX3 = b"""<?xml version="1.0" encoding="UTF-8"?>
<gpx version="1.1" creator="t" xmlns="http://www.topografix.com/GPX/1/1">
  <trk><name>ride</name><trkseg>
    <trkpt lat="46.1" lon="7.2"><ele>512.5</ele><time>2020-05-01T10:00:00Z</time></trkpt>
    <trkpt lat="46.2" lon="7.3"><ele>530.0</ele></trkpt>
    <trkpt lat="46.3" lon="7.4"><ele>498.25</ele><extensions><hr>120</hr></extensions></trkpt>
  </trkseg></trk>
</gpx>"""


def test_parse_three_points_in_order():
    route = parse_gpx(GPX3)
    assert route.id == "ride"
    assert route.elevations == [512.5, 530.0, 498.25]
    assert [(p.lat, p.lon) for p in route.points] == [(46.1, 7.2), (46.2, 7.3), (46.3, 7.4)]
    assert route.points[0].timestamp == 1588327200.0
    assert route.points[1].timestamp is None


def test_parse_without_namespace_and_multiple_segments():
    doc = b"""<gpx><trk><trkseg><trkpt lat="1" lon="2"><ele>3</ele></trkpt></trkseg>
    <trkseg><trkpt lat="1.5" lon="2.5"><ele>4</ele></trkpt></trkseg></trk></gpx>"""
    route = parse_gpx(doc, route_id="x")
    assert route.id == "x"
    assert route.elevations == [3.0, 4.0]


def test_missing_elevation_reports_index():
    doc = GPX3.replace(b"<ele>530.0</ele>", b"")
    with pytest.raises(MissingElevation) as info:
        parse_gpx(doc)
    assert info.value.index == 1


@pytest.mark.parametrize("doc", [b"<gpx><trk>", b"not xml at all", b"<kml></kml>"])
def test_malformed(doc):
    with pytest.raises(MalformedXml):
        parse_gpx(doc)


def test_empty_track():
    with pytest.raises(EmptyTrack):
        parse_gpx(b"<gpx><trk><trkseg></trkseg></trk></gpx>")


def test_point_bounds_validated():
    with pytest.raises(ValueError):
        TrackPoint(91.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        TrackPoint(0.0, 0.0, float("nan"))


def _random_route(rng, n=50):
    lat = rng.uniform(-89, 89, n)
    lon = rng.uniform(-179, 179, n)
    ele = rng.uniform(-400, 8000, n)
    return Route("r", [TrackPoint(float(a), float(b), float(c), 1.6e9 + i) for i, (a, b, c) in
                       enumerate(zip(lat, lon, ele))])


def test_gpx_round_trip(rng):
    for _ in range(20):
        route = _random_route(rng)
        back = parse_gpx(write_gpx(route))
        assert back.id == route.id
        assert len(back.points) == len(route.points)
        for a, b in zip(route.points, back.points):
            assert abs(a.lat - b.lat) <= 1e-7 and abs(a.lon - b.lon) <= 1e-7
            assert a.elevation_m == b.elevation_m
            assert a.timestamp == b.timestamp


def test_bounding_rect_examples():
    pts = [TrackPoint(0, 0, 0), TrackPoint(1, 2, 0), TrackPoint(-1, 1, 0)]
    r = bounding_rect(pts)
    assert r.sw == (-1, 0) and r.ne == (1, 2)
    same = bounding_rect(Route("d", [TrackPoint(5, 5, 1), TrackPoint(5, 5, 2)]))
    assert same.sw == same.ne == (5, 5)
    with pytest.raises(EmptyTrack):
        bounding_rect([])


def test_bounding_rect_matches_scan(rng):
    route = _random_route(rng, 100)
    r = bounding_rect(route)
    lo_lat = lo_lon = math.inf
    hi_lat = hi_lon = -math.inf
    for p in route.points:
        lo_lat, lo_lon = min(lo_lat, p.lat), min(lo_lon, p.lon)
        hi_lat, hi_lon = max(hi_lat, p.lat), max(hi_lon, p.lon)
    assert r.sw == (lo_lat, lo_lon) and r.ne == (hi_lat, hi_lon)
    assert all(r.contains(p.lat, p.lon) for p in route.points)


def test_rect_rejects_inverted_corners():
    with pytest.raises(ValueError):
        Rect((1, 0), (0, 1))


def test_assign_region_first_and_identity():
    regions = []
    rect = Rect((10, 10), (12, 14))
    assert assign_region(rect, regions) == 0
    assert regions[0].center == (11, 12)
    assert assign_region(rect, regions) == 0
    assert len(regions) == 1


def _replay(centers, threshold):
    out, made = [], []
    for c in centers:
        for i, m in enumerate(made):
            if (c[0] - m[0]) ** 2 + (c[1] - m[1]) ** 2 <= threshold ** 2:
                out.append(i)
                break
        else:
            made.append(c)
            out.append(len(made) - 1)
    return out, made


def test_assign_region_matches_replay(rng):
    rects = []
    for _ in range(50):
        lat, lon = rng.uniform(0, 3, 2)
        h, w = rng.uniform(0, 0.2, 2)
        rects.append(Rect((lat, lon), (lat + h, lon + w)))
    regions = []
    labels = [assign_region(r, regions, 0.5) for r in rects]
    expected, made = _replay([r.center for r in rects], 0.5)
    assert labels == expected
    assert [reg.center for reg in regions] == made


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=40),
       st.floats(0.05, 2.0))
def test_region_centers_pairwise_apart(centers, threshold):
    rects = [Rect(c, c) for c in centers]
    regions: list[Region] = []
    labels = [assign_region(r, regions, threshold) for r in rects]
    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            assert math.dist(a.center, b.center) > threshold
    # identical centers always share a label
    by_center = {}
    for c, lab in zip(centers, labels):
        assert by_center.setdefault(c, lab) == lab


def test_label_routes_two_clusters():
    def route(lat, lon):
        return Route(f"{lat},{lon}", [TrackPoint(lat, lon, 0), TrackPoint(lat + 0.01, lon + 0.01, 0)])
    labels, regions = label_routes([route(40, -100), route(40.1, -100.1), route(45, -90)], 0.5)
    assert labels == [0, 0, 1]
    assert len(regions) == 2
    assert np.allclose(regions[1].center, (45.005, -89.995))
