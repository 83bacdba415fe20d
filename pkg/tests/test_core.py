import math
from datetime import datetime, timezone

import numpy as np
import pytest

from geobench.core import (
    GeoPoint,
    GeometryError,
    Period,
    Polygon,
    ResultSet,
    distance_to_polygon,
    haversine_distance,
    haversine_many,
    iso_utc,
    normalize_result,
    parse_iso,
    point_in_polygon,
    points_in_polygon,
    render_row,
    results_equal,
    to_us,
    within_distance_of_polygon,
)

ONE_DEGREE_M = 6_371_000 * math.pi / 180.0  # closed form for 1 degree of arc


def unit_square():
    return Polygon([GeoPoint(0, 0), GeoPoint(1, 0), GeoPoint(1, 1), GeoPoint(0, 1)])


class TestHaversine:
    def test_identity_is_zero(self):
        p = GeoPoint(12.5, 48.1)
        assert haversine_distance(p, p) == 0.0

    def test_one_degree_longitude_at_equator(self):
        d = haversine_distance(GeoPoint(0, 0), GeoPoint(1, 0))
        assert abs(d - ONE_DEGREE_M) <= 0.01

    def test_one_degree_latitude(self):
        d = haversine_distance(GeoPoint(0, 0), GeoPoint(0, 1))
        assert abs(d - ONE_DEGREE_M) <= 0.01

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            lons = rng.uniform(-179, 179, 3)
            lats = rng.uniform(-89, 89, 3)
            a, b, c = (GeoPoint(lo, la) for lo, la in zip(lons, lats))
            ab = haversine_distance(a, b)
            assert ab >= 0
            assert ab == pytest.approx(haversine_distance(b, a), rel=1e-12)
            ac = haversine_distance(a, c)
            bc = haversine_distance(b, c)
            assert ac <= ab + bc + 1e-6 * (ab + bc + 1)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        lon = rng.uniform(-10, 10, 200)
        lat = rng.uniform(40, 55, 200)
        ref = GeoPoint(5.0, 47.0)
        vec = haversine_many(lon, lat, ref)
        for i in range(0, 200, 17):
            assert vec[i] == pytest.approx(
                haversine_distance(GeoPoint(lon[i], lat[i]), ref), rel=1e-12)


class TestPointInPolygon:
    def test_interior_point(self):
        assert point_in_polygon(GeoPoint(0.5, 0.5), unit_square())

    def test_exterior_point(self):
        assert not point_in_polygon(GeoPoint(2, 2), unit_square())

    def test_edge_point_is_inside(self):
        # boundary-inclusive rule, checked on all four edges and a vertex
        sq = unit_square()
        assert point_in_polygon(GeoPoint(1, 0.5), sq)
        assert point_in_polygon(GeoPoint(0, 0.5), sq)
        assert point_in_polygon(GeoPoint(0.5, 0), sq)
        assert point_in_polygon(GeoPoint(0.5, 1), sq)
        assert point_in_polygon(GeoPoint(0, 0), sq)

    def test_degenerate_polygon_rejected(self):
        with pytest.raises(GeometryError):
            Polygon([GeoPoint(0, 0), GeoPoint(1, 1)])
        with pytest.raises(GeometryError):
            Polygon([GeoPoint(0, 0), GeoPoint(1, 1), GeoPoint(0, 0), GeoPoint(1, 1)])

    def test_self_intersecting_rejected(self):
        with pytest.raises(GeometryError):
            Polygon([GeoPoint(0, 0), GeoPoint(1, 1), GeoPoint(1, 0), GeoPoint(0, 1)])

    def test_agrees_with_winding_number_on_random_convex_polygons(self):
        # independent oracle: winding number via signed angle accumulation
        def winding_inside(px, py, verts):
            total = 0.0
            n = len(verts)
            for i in range(n):
                x1, y1 = verts[i][0] - px, verts[i][1] - py
                x2, y2 = verts[(i + 1) % n][0] - px, verts[(i + 1) % n][1] - py
                total += math.atan2(x1 * y2 - y1 * x2, x1 * x2 + y1 * y2)
            return abs(total) > math.pi

        rng = np.random.default_rng(11)
        checked = 0
        while checked < 1000:
            cx, cy = rng.uniform(-50, 50, 2)
            r = rng.uniform(0.5, 5)
            angles = np.sort(rng.uniform(0, 2 * math.pi, rng.integers(3, 9)))
            if np.min(np.diff(angles)) < 0.05:
                continue
            verts = [(cx + r * math.cos(a), cy + r * math.sin(a)) for a in angles]
            poly = Polygon([GeoPoint(x, y) for x, y in verts])
            px = cx + rng.uniform(-2 * r, 2 * r)
            py = cy + rng.uniform(-2 * r, 2 * r)
            assert point_in_polygon(GeoPoint(px, py), poly) == winding_inside(px, py, verts)
            checked += 1

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(5)
        poly = Polygon([GeoPoint(0, 0), GeoPoint(2, 0.3), GeoPoint(2.5, 2), GeoPoint(0.5, 1.7)])
        lon = rng.uniform(-1, 3, 500)
        lat = rng.uniform(-1, 3, 500)
        vec = points_in_polygon(lon, lat, poly)
        scalar = [point_in_polygon(GeoPoint(lo, la), poly) for lo, la in zip(lon, lat)]
        assert vec.tolist() == scalar


class TestDistanceToPolygon:
    def test_inside_is_zero(self):
        assert distance_to_polygon(GeoPoint(0.5, 0.5), unit_square()) == 0.0

    def test_vertex_coincident_is_zero(self):
        assert distance_to_polygon(GeoPoint(1, 1), unit_square()) == 0.0

    def test_one_degree_above_square(self):
        d = distance_to_polygon(GeoPoint(0, 2), unit_square())
        assert abs(d - ONE_DEGREE_M) <= 0.005 * ONE_DEGREE_M

    def test_within_distance_matches_scalar(self):
        rng = np.random.default_rng(9)
        poly = unit_square()
        lon = rng.uniform(-2, 3, 400)
        lat = rng.uniform(-2, 3, 400)
        radius = 60_000.0
        vec = within_distance_of_polygon(lon, lat, poly, radius)
        scalar = [distance_to_polygon(GeoPoint(lo, la), poly) <= radius
                  for lo, la in zip(lon, lat)]
        assert vec.tolist() == scalar


class TestTime:
    def test_iso_round_trip(self):
        t = datetime(2025, 11, 10, 10, 0, 0, 123456, tzinfo=timezone.utc)
        assert iso_utc(t) == "2025-11-10T10:00:00.123456Z"
        assert parse_iso(iso_utc(t)) == t

    def test_parse_offset_form(self):
        t = parse_iso("2025-11-10T12:00:00+02:00")
        assert iso_utc(t) == "2025-11-10T10:00:00.000000Z"

    def test_to_us_is_exact(self):
        t = datetime(2025, 11, 10, 10, 0, 0, 1, tzinfo=timezone.utc)
        assert to_us(t) % 10 == 1

    def test_period_is_closed_open(self):
        p = Period(datetime(2025, 1, 1, tzinfo=timezone.utc),
                   datetime(2025, 1, 2, tzinfo=timezone.utc))
        assert p.contains(p.start)
        assert not p.contains(p.end)
        assert p.duration_seconds == 86400.0

    def test_period_rejects_reversed(self):
        with pytest.raises(ValueError):
            Period(datetime(2025, 1, 2, tzinfo=timezone.utc),
                   datetime(2025, 1, 1, tzinfo=timezone.utc))


class TestNormalizeResult:
    def test_rows_sorted(self):
        r = ResultSet.make(["n"], [(2,), (1,)])
        assert normalize_result(r).rows == ((1,), (2,))

    def test_empty_identity(self):
        r = ResultSet.make(["n"], [])
        assert normalize_result(r) == r

    def test_float_tolerance(self):
        a = ResultSet.make(["v"], [(1.0000001,)])
        b = ResultSet.make(["v"], [(1.0000002,)])
        assert results_equal(a, b)
        assert not results_equal(a, ResultSet.make(["v"], [(1.001,)]))

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            rows = [(int(rng.integers(0, 5)), float(rng.normal()), "x") for _ in range(6)]
            r = ResultSet.make(["a", "b", "c"], rows)
            once = normalize_result(r)
            assert normalize_result(once) == once

    def test_row_order_does_not_matter(self):
        a = ResultSet.make(["id"], [("t1",), ("t2",), ("t3",)])
        b = ResultSet.make(["id"], [("t3",), ("t1",), ("t2",)])
        assert results_equal(a, b)

    def test_timestamp_and_string_render_alike(self):
        t = datetime(2025, 11, 10, 10, 0, tzinfo=timezone.utc)
        assert render_row((t,)) == render_row(("2025-11-10T10:00:00.000000Z",))

    def test_column_mismatch_not_equal(self):
        a = ResultSet.make(["a"], [(1,)])
        b = ResultSet.make(["b"], [(1,)])
        assert not results_equal(a, b)
