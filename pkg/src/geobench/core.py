"""Shared domain types and geometry/time primitives.

Everything here is an immutable value type, safe to share across concurrent
workers. All geodesy is spherical (R = 6,371,000 m) and polygon containment
is planar in (lon, lat); timestamps are UTC with microsecond resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

EARTH_RADIUS_M = 6_371_000.0
UTC = timezone.utc
_EPOCH = datetime(1970, 1, 1, tzinfo=UTC)

# feature kinds and the geometry each carries
POLYGON_KINDS = frozenset({"district", "county", "island"})
POINT_KINDS = frozenset({"city", "airport", "university", "harbor"})
FEATURE_KINDS = POLYGON_KINDS | POINT_KINDS

# samples per polygon edge when discretizing the boundary for distance tests
BOUNDARY_SAMPLES_PER_EDGE = 32


class GeoBenchError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(GeoBenchError):
    """Invalid or degenerate geometry."""


# ---------------------------------------------------------------------------
# time


def to_us(t: datetime) -> int:
    """Convert an aware datetime to integer microseconds since the epoch."""
    if t.tzinfo is None:
        raise ValueError("naive datetime; timestamps must be timezone-aware")
    td = t - _EPOCH
    return (td.days * 86_400 + td.seconds) * 1_000_000 + td.microseconds


def from_us(us: int) -> datetime:
    return _EPOCH + timedelta(microseconds=int(us))


def iso_utc(t: datetime) -> str:
    """Canonical timestamp text: ISO-8601 UTC with microseconds and 'Z'."""
    t = t.astimezone(UTC)
    return f"{t.year:04d}-{t.month:02d}-{t.day:02d}T{t.hour:02d}:{t.minute:02d}:{t.second:02d}.{t.microsecond:06d}Z"


def parse_iso(text: str) -> datetime:
    """Parse ISO-8601 text; 'Z' suffix and offset forms both accepted."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    t = datetime.fromisoformat(s)
    if t.tzinfo is None:
        t = t.replace(tzinfo=UTC)
    return t.astimezone(UTC)


def hour_floor_us(us: int) -> int:
    """Truncate an epoch-microsecond timestamp down to the hour."""
    return (us // 3_600_000_000) * 3_600_000_000


# ---------------------------------------------------------------------------
# spatial types


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate; altitude in meters is present for 3D scenarios only."""

    lon: float
    lat: float
    alt: Optional[float] = None

    def __post_init__(self) -> None:
        if not (-180.0 <= self.lon <= 180.0):
            raise GeometryError(f"longitude out of range: {self.lon}")
        if not (-90.0 <= self.lat <= 90.0):
            raise GeometryError(f"latitude out of range: {self.lat}")

    def wkt(self) -> str:
        return f"POINT({self.lon!r} {self.lat!r})"


@dataclass(frozen=True)
class TimeInstant:
    """A UTC timestamp with microsecond resolution."""

    t: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", self.t.astimezone(UTC))

    @property
    def us(self) -> int:
        return to_us(self.t)


@dataclass(frozen=True)
class Period:
    """A closed-open time interval [start, end)."""

    start: datetime
    end: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", self.start.astimezone(UTC))
        object.__setattr__(self, "end", self.end.astimezone(UTC))
        if self.start > self.end:
            raise ValueError(f"period start {self.start} after end {self.end}")

    @property
    def start_us(self) -> int:
        return to_us(self.start)

    @property
    def end_us(self) -> int:
        return to_us(self.end)

    @property
    def duration_seconds(self) -> float:
        return (self.end_us - self.start_us) / 1e6

    def contains(self, t: datetime) -> bool:
        return self.start <= t.astimezone(UTC) < self.end

    def __str__(self) -> str:
        return f"[{iso_utc(self.start)}, {iso_utc(self.end)})"


class Polygon:
    """A simple closed ring of (lon, lat) vertices.

    The ring is stored without the repeated closing vertex; edges wrap from
    the last vertex back to the first. Containment is boundary-inclusive.
    """

    __slots__ = ("vertices", "_samples")

    def __init__(self, vertices: Sequence[GeoPoint], check_simple: bool = True):
        verts = list(vertices)
        if len(verts) >= 2 and verts[0].lon == verts[-1].lon and verts[0].lat == verts[-1].lat:
            verts = verts[:-1]
        if len({(v.lon, v.lat) for v in verts}) < 3:
            raise GeometryError("degenerate polygon: fewer than 3 distinct vertices")
        self.vertices: tuple[GeoPoint, ...] = tuple(verts)
        if check_simple and not self._is_simple():
            raise GeometryError("polygon ring is self-intersecting")
        self._samples: Optional[np.ndarray] = None

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polygon) and self.vertices == other.vertices

    def __hash__(self) -> int:
        return hash(self.vertices)

    def __repr__(self) -> str:
        return f"Polygon({len(self.vertices)} vertices)"

    def edges(self) -> Iterator[tuple[GeoPoint, GeoPoint]]:
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]

    def bbox(self) -> tuple[float, float, float, float]:
        lons = [v.lon for v in self.vertices]
        lats = [v.lat for v in self.vertices]
        return min(lons), min(lats), max(lons), max(lats)

    def wkt(self) -> str:
        pts = list(self.vertices) + [self.vertices[0]]
        inner = ", ".join(f"{v.lon!r} {v.lat!r}" for v in pts)
        return f"POLYGON(({inner}))"

    def boundary_samples(self) -> np.ndarray:
        """(M, 2) lon/lat points discretizing the ring, every vertex included."""
        if self._samples is None:
            pts = []
            for a, b in self.edges():
                ts = np.arange(BOUNDARY_SAMPLES_PER_EDGE) / BOUNDARY_SAMPLES_PER_EDGE
                pts.append(np.column_stack([a.lon + ts * (b.lon - a.lon),
                                            a.lat + ts * (b.lat - a.lat)]))
            self._samples = np.concatenate(pts)
        return self._samples

    def _is_simple(self) -> bool:
        segs = list(self.edges())
        n = len(segs)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue  # adjacent edges share a vertex by construction
                if _segments_cross(segs[i], segs[j]):
                    return False
        return True


def _segments_cross(s1: tuple[GeoPoint, GeoPoint], s2: tuple[GeoPoint, GeoPoint]) -> bool:
    (a, b), (c, d) = s1, s2

    def orient(p: GeoPoint, q: GeoPoint, r: GeoPoint) -> float:
        return (q.lon - p.lon) * (r.lat - p.lat) - (q.lat - p.lat) * (r.lon - p.lon)

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0


Geometry = Union[Polygon, GeoPoint]


@dataclass(frozen=True)
class SupportingFeature:
    """A named auxiliary geometry used for joins and filters in queries."""

    name: str
    kind: str
    geometry: Geometry

    def __post_init__(self) -> None:
        if self.kind not in FEATURE_KINDS:
            raise GeometryError(f"unknown feature kind: {self.kind!r}")


@dataclass(frozen=True)
class TrajectoryInstant:
    """One position update of one trip."""

    trip_id: str
    seq: int
    t: datetime
    point: GeoPoint


@dataclass(frozen=True)
class Trip:
    """Per-trip summary record: start/end time and location only."""

    trip_id: str
    object_id: str
    start_t: datetime
    end_t: datetime
    start_point: GeoPoint
    end_point: GeoPoint
    n_points: int

    def __post_init__(self) -> None:
        if self.start_t > self.end_t:
            raise ValueError(f"trip {self.trip_id}: start after end")
        if self.n_points < 2:
            raise ValueError(f"trip {self.trip_id}: fewer than 2 points")

    @property
    def duration_seconds(self) -> float:
        return (to_us(self.end_t) - to_us(self.start_t)) / 1e6


# ---------------------------------------------------------------------------
# geodesy


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371,000 m."""
    lon1, lat1, lon2, lat2 = map(math.radians, (a.lon, a.lat, b.lon, b.lat))
    s = (math.sin((lat2 - lat1) / 2.0) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2)
    return EARTH_RADIUS_M * 2.0 * math.asin(min(1.0, math.sqrt(s)))


def haversine_many(lon: np.ndarray, lat: np.ndarray, ref: GeoPoint) -> np.ndarray:
    """Vectorized haversine from many (lon, lat) points to one reference point."""
    lon1 = np.radians(lon)
    lat1 = np.radians(lat)
    lon2 = math.radians(ref.lon)
    lat2 = math.radians(ref.lat)
    s = (np.sin((lat2 - lat1) / 2.0) ** 2
         + np.cos(lat1) * math.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2)
    return EARTH_RADIUS_M * 2.0 * np.arcsin(np.minimum(1.0, np.sqrt(s)))


def meters_per_degree(lat: float) -> tuple[float, float]:
    """(meters per degree longitude, meters per degree latitude) at a latitude."""
    m_per_deg = EARTH_RADIUS_M * math.pi / 180.0
    return m_per_deg * math.cos(math.radians(lat)), m_per_deg


def point_in_polygon(p: GeoPoint, poly: Polygon) -> bool:
    """Even-odd containment in the (lon, lat) plane; boundary points are inside."""
    x, y = p.lon, p.lat
    inside = False
    for a, b in poly.edges():
        cross = (b.lon - a.lon) * (y - a.lat) - (b.lat - a.lat) * (x - a.lon)
        if (cross == 0.0
                and min(a.lon, b.lon) <= x <= max(a.lon, b.lon)
                and min(a.lat, b.lat) <= y <= max(a.lat, b.lat)):
            return True
        if (a.lat > y) != (b.lat > y):
            x_cross = a.lon + (y - a.lat) * (b.lon - a.lon) / (b.lat - a.lat)
            if x < x_cross:
                inside = not inside
    return inside


def points_in_polygon(lon: np.ndarray, lat: np.ndarray, poly: Polygon) -> np.ndarray:
    """Vectorized twin of point_in_polygon; identical rule, identical arithmetic."""
    inside = np.zeros(lon.shape, dtype=bool)
    boundary = np.zeros(lon.shape, dtype=bool)
    for a, b in poly.edges():
        cross = (b.lon - a.lon) * (lat - a.lat) - (b.lat - a.lat) * (lon - a.lon)
        boundary |= ((cross == 0.0)
                     & (lon >= min(a.lon, b.lon)) & (lon <= max(a.lon, b.lon))
                     & (lat >= min(a.lat, b.lat)) & (lat <= max(a.lat, b.lat)))
        cond = (a.lat > lat) != (b.lat > lat)
        if a.lat != b.lat:
            x_cross = a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat)
            inside ^= cond & (lon < x_cross)
    return inside | boundary


def distance_to_polygon(p: GeoPoint, poly: Polygon) -> float:
    """Meters from a point to a polygon: 0 inside, else the minimum haversine
    distance to the discretized ring (BOUNDARY_SAMPLES_PER_EDGE per edge)."""
    if point_in_polygon(p, poly):
        return 0.0
    samples = poly.boundary_samples()
    return float(np.min(haversine_many(samples[:, 0], samples[:, 1], p)))


def within_distance_of_polygon(lon: np.ndarray, lat: np.ndarray, poly: Polygon,
                               radius_m: float) -> np.ndarray:
    """Vectorized: inside the polygon, or within radius of its discretized ring."""
    hit = points_in_polygon(lon, lat, poly)
    remaining = np.flatnonzero(~hit)
    if remaining.size:
        samples = poly.boundary_samples()
        slon = np.radians(samples[:, 0])[None, :]
        slat = np.radians(samples[:, 1])[None, :]
        for start in range(0, remaining.size, 4096):
            idx = remaining[start:start + 4096]
            plon = np.radians(lon[idx])[:, None]
            plat = np.radians(lat[idx])[:, None]
            s = (np.sin((slat - plat) / 2.0) ** 2
                 + np.cos(plat) * np.cos(slat) * np.sin((slon - plon) / 2.0) ** 2)
            d = EARTH_RADIUS_M * 2.0 * np.arcsin(np.minimum(1.0, np.sqrt(s)))
            hit[idx[d.min(axis=1) <= radius_m]] = True
    return hit


# ---------------------------------------------------------------------------
# result sets


Scalar = Union[int, float, str, datetime, None]


@dataclass(frozen=True)
class ResultSet:
    """Columns plus rows of scalar values, as returned by any adapter."""

    columns: tuple[str, ...]
    rows: tuple[tuple, ...] = ()

    @staticmethod
    def make(columns: Iterable[str], rows: Iterable[Iterable[Scalar]]) -> "ResultSet":
        return ResultSet(tuple(columns), tuple(tuple(r) for r in rows))

    def __len__(self) -> int:
        return len(self.rows)


def render_cell(v: Scalar) -> str:
    """Canonical text rendering used for sorting and comparison.

    Floats render at 6 significant fractional digits of the mantissa so values
    agreeing within ~1e-6 relative compare equal; timestamps render in UTC.
    """
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if v == 0.0:
            return "0.000000e+00"
        return f"{v:.6e}"
    if isinstance(v, datetime):
        return iso_utc(v)
    return str(v)


def render_row(row: Sequence[Scalar]) -> tuple[str, ...]:
    return tuple(render_cell(v) for v in row)


def normalize_result(r: ResultSet) -> ResultSet:
    """Rows sorted lexicographically by canonical rendering; columns preserved.

    Idempotent; two adapters' results for the same query instance compare
    equal after normalization iff they are semantically equal.
    """
    return ResultSet(r.columns, tuple(sorted(r.rows, key=render_row)))


def _cells_equal(a: Scalar, b: Scalar, float_rtol: float) -> bool:
    a_num = isinstance(a, (int, float)) and not isinstance(a, bool)
    b_num = isinstance(b, (int, float)) and not isinstance(b, bool)
    if a_num and b_num and (isinstance(a, float) or isinstance(b, float)):
        return math.isclose(float(a), float(b), rel_tol=float_rtol, abs_tol=1e-12)
    return render_cell(a) == render_cell(b)


def results_equal(a: ResultSet, b: ResultSet, float_rtol: float = 1e-6) -> bool:
    """Semantic equality of two result sets, independent of row order."""
    if a.columns != b.columns or len(a.rows) != len(b.rows):
        return False
    na, nb = normalize_result(a), normalize_result(b)
    return all(
        len(ra) == len(rb) and all(_cells_equal(x, y, float_rtol) for x, y in zip(ra, rb))
        for ra, rb in zip(na.rows, nb.rows)
    )
