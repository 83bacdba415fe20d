"""Deterministic synthetic generators for the three moving-object scenarios.

Each scenario has a movement model tuned to reproduce the qualitative
contrasts between the real datasets it stands in for: short dense flights,
long cycling rides, very long harbor-to-harbor crossings. Generation is
single-threaded and fully determined by the spec (seed included); datasets
are emitted whole-trip: the generator keeps appending complete trips until
the target point count is reached, so the final dataset may overshoot the
scale factor by at most one trip.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import (
    FEATURE_KINDS,
    GeoBenchError,
    GeoPoint,
    Period,
    Polygon,
    SupportingFeature,
    Trip,
    TrajectoryInstant,
    from_us,
    haversine_distance,
    iso_utc,
    meters_per_degree,
    parse_iso,
    to_us,
)

SCENARIOS = ("cycling", "aviation", "ais")

_UTC = timezone.utc

# Per-scenario defaults. Trip-length means follow the published size ratios of
# the real datasets (points per trip at the reference scale); bboxes are
# regional stand-ins sized like the real coverage areas.
_DEFAULTS = {
    "cycling": dict(
        bbox=(13.10, 52.35, 13.65, 52.65),
        time_extent=(datetime(2023, 4, 1, tzinfo=_UTC), datetime(2023, 6, 30, tzinfo=_UTC)),
        trip_points_mean=3624.0,
        trip_points_dispersion=0.35,
        sampling_interval_mean=1.0,
    ),
    "aviation": dict(
        bbox=(5.85, 50.30, 9.50, 52.55),
        time_extent=(datetime(2023, 1, 1, tzinfo=_UTC), datetime(2024, 1, 1, tzinfo=_UTC)),
        trip_points_mean=210.0,
        trip_points_dispersion=0.35,
        sampling_interval_mean=7.0,
    ),
    "ais": dict(
        bbox=(22.80, 36.50, 25.30, 38.50),
        time_extent=(datetime(2023, 6, 1, tzinfo=_UTC), datetime(2023, 8, 30, tzinfo=_UTC)),
        trip_points_mean=3252.0,
        trip_points_dispersion=0.35,
        sampling_interval_mean=35.0,
    ),
}

_TRIP_PREFIX = {"cycling": "ride", "aviation": "flt", "ais": "crossing"}
_OBJECT_PREFIX = {"cycling": "rider", "aviation": "aircraft", "ais": "vessel"}


class DatasetError(GeoBenchError):
    """Invalid dataset spec, content, or on-disk representation."""


@dataclass(frozen=True)
class DatasetSpec:
    """Everything that determines a generated dataset, seed included."""

    scenario: str
    scale_factor: int
    seed: int = 42
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    time_extent: Period = None  # type: ignore[assignment]
    trip_points_mean: float = 0.0
    trip_points_dispersion: float = 0.0
    sampling_interval_mean: float = 0.0

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise DatasetError(f"unknown scenario: {self.scenario!r}")
        if self.scale_factor < 2:
            raise DatasetError("scale_factor must be at least 2 (one whole trip)")
        if self.scale_factor < self.trip_points_mean:
            raise DatasetError("scale_factor must be >= trip_points_mean")
        lon0, lat0, lon1, lat1 = self.bbox
        if not (lon0 < lon1 and lat0 < lat1):
            raise DatasetError(f"degenerate bbox: {self.bbox}")
        if self.time_extent is None:
            raise DatasetError("time_extent is required")
        if self.time_extent.start >= self.time_extent.end:
            raise DatasetError("empty time extent")
        if self.trip_points_dispersion <= 0 or self.sampling_interval_mean <= 0:
            raise DatasetError("dispersion and sampling interval must be positive")


def default_spec(scenario: str, scale_factor: int, seed: int = 42, **overrides) -> DatasetSpec:
    """A DatasetSpec with the scenario defaults, fields overridable by name."""
    if scenario not in _DEFAULTS:
        raise DatasetError(f"unknown scenario: {scenario!r}")
    params = dict(_DEFAULTS[scenario])
    start, end = params.pop("time_extent")
    params["time_extent"] = Period(start, end)
    params.update(overrides)
    return DatasetSpec(scenario=scenario, scale_factor=scale_factor, seed=seed, **params)


class InstantColumns:
    """Columnar storage of the full instant stream (one row per update)."""

    __slots__ = ("trip_row", "seq", "t_us", "lon", "lat", "alt")

    def __init__(self, trip_row: np.ndarray, seq: np.ndarray, t_us: np.ndarray,
                 lon: np.ndarray, lat: np.ndarray, alt: Optional[np.ndarray]):
        self.trip_row = trip_row
        self.seq = seq
        self.t_us = t_us
        self.lon = lon
        self.lat = lat
        self.alt = alt

    def __len__(self) -> int:
        return len(self.t_us)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InstantColumns):
            return NotImplemented
        if (self.alt is None) != (other.alt is None):
            return False
        same = (np.array_equal(self.trip_row, other.trip_row)
                and np.array_equal(self.seq, other.seq)
                and np.array_equal(self.t_us, other.t_us)
                and np.array_equal(self.lon, other.lon)
                and np.array_equal(self.lat, other.lat))
        if same and self.alt is not None:
            same = np.array_equal(self.alt, other.alt)
        return same


@dataclass(frozen=True)
class DatasetStats:
    """Statistical properties of an emitted dataset, used for parameter generation."""

    scenario: str
    total_points: int
    total_trips: int
    avg_points_per_trip: float
    time_extent: Period
    bbox: tuple[float, float, float, float]
    feature_names: dict[str, tuple[str, ...]]


@dataclass
class Dataset:
    scenario: str
    instants: InstantColumns
    trips: list[Trip]
    features: list[SupportingFeature]
    stats: DatasetStats

    def iter_instants(self) -> Iterator[TrajectoryInstant]:
        cols = self.instants
        for i in range(len(cols)):
            row = int(cols.trip_row[i])
            alt = float(cols.alt[i]) if cols.alt is not None else None
            yield TrajectoryInstant(
                trip_id=self.trips[row].trip_id,
                seq=int(cols.seq[i]),
                t=from_us(int(cols.t_us[i])),
                point=GeoPoint(float(cols.lon[i]), float(cols.lat[i]), alt),
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.scenario == other.scenario and self.instants == other.instants
                and self.trips == other.trips and self.features == other.features
                and self.stats == other.stats)


# ---------------------------------------------------------------------------
# supporting features


def _tile_bbox(rng: np.random.Generator, bbox, nx: int, ny: int, kind: str) -> list[SupportingFeature]:
    """Rectangular tiling with jittered interior cut lines: covers the bbox
    exactly, with pairwise-disjoint interiors (the partition Cyc/Avi region
    queries rely on)."""
    lon0, lat0, lon1, lat1 = bbox
    xs = [lon0] + [lon0 + (lon1 - lon0) * (i + rng.uniform(-0.3, 0.3)) / nx
                   for i in range(1, nx)] + [lon1]
    ys = [lat0] + [lat0 + (lat1 - lat0) * (j + rng.uniform(-0.3, 0.3)) / ny
                   for j in range(1, ny)] + [lat1]
    out = []
    k = 1
    for j in range(ny):
        for i in range(nx):
            ring = [GeoPoint(xs[i], ys[j]), GeoPoint(xs[i + 1], ys[j]),
                    GeoPoint(xs[i + 1], ys[j + 1]), GeoPoint(xs[i], ys[j + 1])]
            out.append(SupportingFeature(f"{kind}-{k:02d}", kind, Polygon(ring)))
            k += 1
    return out


def _scatter_points(rng: np.random.Generator, bbox, n: int, kind: str,
                    margin: float = 0.08) -> list[SupportingFeature]:
    lon0, lat0, lon1, lat1 = bbox
    mx, my = (lon1 - lon0) * margin, (lat1 - lat0) * margin
    out = []
    for k in range(1, n + 1):
        p = GeoPoint(float(rng.uniform(lon0 + mx, lon1 - mx)),
                     float(rng.uniform(lat0 + my, lat1 - my)))
        out.append(SupportingFeature(f"{kind}-{k:02d}", kind, p))
    return out


def _scatter_islands(rng: np.random.Generator, bbox, n: int,
                     harbors: Sequence[SupportingFeature]) -> list[SupportingFeature]:
    lon0, lat0, lon1, lat1 = bbox
    mdeg_lon, mdeg_lat = meters_per_degree((lat0 + lat1) / 2)
    centers: list[GeoPoint] = []
    out = []
    k = 1
    while len(out) < n:
        c = GeoPoint(float(rng.uniform(lon0 + 0.1, lon1 - 0.1)),
                     float(rng.uniform(lat0 + 0.1, lat1 - 0.1)))
        radius_m = float(rng.uniform(1500, 5000))
        # keep islands clear of harbors and of each other
        if any(haversine_distance(c, h.geometry) < radius_m + 8000 for h in harbors):
            continue
        if any(haversine_distance(c, o) < 14000 for o in centers):
            continue
        angles = np.linspace(0, 2 * math.pi, 7)[:-1] + rng.uniform(-0.2, 0.2, 6)
        radii = radius_m * rng.uniform(0.8, 1.2, 6)
        ring = [GeoPoint(c.lon + r * math.sin(a) / mdeg_lon,
                         c.lat + r * math.cos(a) / mdeg_lat)
                for a, r in zip(angles, radii)]
        out.append(SupportingFeature(f"island-{k:02d}", "island", Polygon(ring)))
        centers.append(c)
        k += 1
    return out


def generate_supporting_features(scenario: str, seed: int,
                                 bbox: Optional[tuple] = None) -> list[SupportingFeature]:
    """Deterministic per-scenario auxiliary geometries for joins and filters."""
    if scenario not in _DEFAULTS:
        raise DatasetError(f"unknown scenario: {scenario!r}")
    bbox = bbox or _DEFAULTS[scenario]["bbox"]
    rng = np.random.default_rng([seed, 0])
    # kinds that appear as a query's only parameter carry >= 50 names so that
    # 50 pairwise-distinct parameter sets exist for those queries
    if scenario == "cycling":
        return (_tile_bbox(rng, bbox, 10, 6, "district")
                + _scatter_points(rng, bbox, 55, "university"))
    if scenario == "aviation":
        return (_tile_bbox(rng, bbox, 8, 7, "county")
                + _scatter_points(rng, bbox, 12, "city")
                + _scatter_points(rng, bbox, 6, "airport"))
    harbors = _scatter_points(rng, bbox, 12, "harbor")
    return _scatter_islands(rng, bbox, 6, harbors) + harbors


# ---------------------------------------------------------------------------
# movement models


def _fold(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Reflect values into [lo, hi] (triangle fold), vectorized and exact."""
    span = hi - lo
    y = np.mod(x - lo, 2 * span)
    return lo + np.where(y <= span, y, 2 * span - y)


def _draw_length(rng: np.random.Generator, spec: DatasetSpec) -> int:
    sigma = spec.trip_points_dispersion
    mu = math.log(spec.trip_points_mean) - sigma * sigma / 2.0
    return max(2, int(round(rng.lognormal(mu, sigma))))


def _draw_start_us(rng: np.random.Generator, spec: DatasetSpec, duration_us: int) -> int:
    """Uniform trip start such that the whole trip fits inside the extent."""
    ext0, ext1 = spec.time_extent.start_us, spec.time_extent.end_us
    latest = ext1 - 1 - duration_us
    if latest <= ext0:
        return ext0
    return int(rng.integers(ext0, latest + 1))


def _unit_towards(a: GeoPoint, b: GeoPoint, mdeg: tuple[float, float]) -> tuple[float, float, float]:
    """Unit direction (in meter space) from a to b, plus the planar distance."""
    ex = (b.lon - a.lon) * mdeg[0]
    ey = (b.lat - a.lat) * mdeg[1]
    dist = math.hypot(ex, ey)
    if dist == 0:
        return 1.0, 0.0, 0.0
    return ex / dist, ey / dist, dist


class _CyclingModel:
    """Random waypoint walk with heading persistence, 1 Hz, ~2-8 m/s."""

    def __init__(self, spec: DatasetSpec, features: list[SupportingFeature]):
        self.spec = spec
        self.unis = [f.geometry for f in features if f.kind == "university"]
        self.mdeg = meters_per_degree((spec.bbox[1] + spec.bbox[3]) / 2)

    def make_trip(self, rng: np.random.Generator, n: int):
        spec = self.spec
        lon0, lat0, lon1, lat1 = spec.bbox
        dt_s = spec.sampling_interval_mean
        dt_us = max(1, int(round(dt_s * 1e6)))
        n = _cap_length(n, dt_us, spec)
        base_v = rng.uniform(2.0, 8.0)
        heading = rng.uniform(0, 2 * math.pi) + np.concatenate(
            [[0.0], np.cumsum(rng.normal(0.0, 0.18, n - 1))])
        speed = base_v * rng.uniform(0.85, 1.15, n - 1)
        de = speed * np.sin(heading[:-1]) * dt_s
        dn = speed * np.cos(heading[:-1]) * dt_s
        sx = rng.uniform(lon0, lon1)
        sy = rng.uniform(lat0, lat1)
        lon = sx + np.concatenate([[0.0], np.cumsum(de)]) / self.mdeg[0]
        lat = sy + np.concatenate([[0.0], np.cumsum(dn)]) / self.mdeg[1]
        lon = _fold(lon, lon0, lon1)
        lat = _fold(lat, lat0, lat1)
        # a quarter of rides head home to a university, keeping the
        # trips-ending-near-a-point queries non-degenerate at bench scale
        if self.unis and rng.uniform() < 0.25:
            u = self.unis[int(rng.integers(len(self.unis)))]
            tx = u.lon + rng.normal(0, 80) / self.mdeg[0]
            ty = u.lat + rng.normal(0, 80) / self.mdeg[1]
            shift_x, shift_y = tx - lon[-1], ty - lat[-1]
            cand_lon, cand_lat = lon + shift_x, lat + shift_y
            if (cand_lon.min() >= lon0 and cand_lon.max() <= lon1
                    and cand_lat.min() >= lat0 and cand_lat.max() <= lat1):
                lon, lat = cand_lon, cand_lat
        start_us = _draw_start_us(rng, spec, (n - 1) * dt_us)
        t_us = start_us + np.arange(n, dtype=np.int64) * dt_us
        return t_us, lon, lat, None


class _AviationModel:
    """Great-circle-style legs between airport/border anchors with an
    altitude ramp-cruise-descent profile; 3D scenario."""

    def __init__(self, spec: DatasetSpec, features: list[SupportingFeature]):
        self.spec = spec
        self.mdeg = meters_per_degree((spec.bbox[1] + spec.bbox[3]) / 2)
        airports = [f.geometry for f in features if f.kind == "airport"]
        self.anchors = airports + self._border_anchors(spec.bbox)

    @staticmethod
    def _border_anchors(bbox) -> list[GeoPoint]:
        lon0, lat0, lon1, lat1 = bbox
        pts = []
        for frac in (0.2, 0.5, 0.8):
            pts.append(GeoPoint(lon0 + frac * (lon1 - lon0), lat0))
            pts.append(GeoPoint(lon0 + frac * (lon1 - lon0), lat1))
            pts.append(GeoPoint(lon0, lat0 + frac * (lat1 - lat0)))
            pts.append(GeoPoint(lon1, lat0 + frac * (lat1 - lat0)))
        return pts

    def make_trip(self, rng: np.random.Generator, n: int):
        spec = self.spec
        lon0, lat0, lon1, lat1 = spec.bbox
        i, j = rng.choice(len(self.anchors), 2, replace=False)
        a, b = self.anchors[int(i)], self.anchors[int(j)]
        v = rng.uniform(150.0, 250.0)
        ux, uy, dist = _unit_towards(a, b, self.mdeg)
        dt_s = min(10.0, max(4.0, dist / (n * v))) if dist > 0 else 7.0
        dt_us = max(1, int(round(dt_s * 1e6)))
        n = _cap_length(n, dt_us, spec)
        along = np.arange(n) * (v * dt_s)
        lon = _fold(a.lon + ux * along / self.mdeg[0], lon0, lon1)
        lat = _fold(a.lat + uy * along / self.mdeg[1], lat0, lat1)
        cruise = rng.uniform(8000.0, 11000.0)
        ramp = max(1, int(0.15 * n))
        idx = np.arange(n)
        if n <= 2 * ramp + 1:
            alt = np.full(n, cruise / 2)
        else:
            alt = np.interp(idx, [0, ramp, n - 1 - ramp, n - 1],
                            [600.0, cruise, cruise, 600.0])
        start_us = _draw_start_us(rng, spec, (n - 1) * dt_us)
        t_us = start_us + np.arange(n, dtype=np.int64) * dt_us
        return t_us, lon, lat, alt


class _AisModel:
    """Low-speed harbor-to-harbor legs with lateral noise; after arrival the
    vessel loiters near the destination so crossings end where they should."""

    def __init__(self, spec: DatasetSpec, features: list[SupportingFeature]):
        self.spec = spec
        self.harbors = [f.geometry for f in features if f.kind == "harbor"]
        self.mdeg = meters_per_degree((spec.bbox[1] + spec.bbox[3]) / 2)

    def make_trip(self, rng: np.random.Generator, n: int):
        spec = self.spec
        lon0, lat0, lon1, lat1 = spec.bbox
        i, j = rng.choice(len(self.harbors), 2, replace=False)
        a, b = self.harbors[int(i)], self.harbors[int(j)]
        v = rng.uniform(2.0, 10.0)
        dt_s = rng.uniform(10.0, 60.0)
        dt_us = max(1, int(round(dt_s * 1e6)))
        n = _cap_length(n, dt_us, spec)
        sx = a.lon + rng.normal(0, 250) / self.mdeg[0]
        sy = a.lat + rng.normal(0, 250) / self.mdeg[1]
        start = GeoPoint(min(lon1, max(lon0, sx)), min(lat1, max(lat0, sy)))
        ux, uy, dist = _unit_towards(start, b, self.mdeg)
        step = v * dt_s
        along = np.minimum(np.arange(n) * step, dist)
        arrived = np.arange(n) * step >= dist
        perp = _fold(np.cumsum(rng.normal(0, 12, n)), -600, 600)
        perp[0] = 0.0
        loiter_x = np.cumsum(rng.normal(0, 4, n) * arrived)
        loiter_y = np.cumsum(rng.normal(0, 4, n) * arrived)
        ex = ux * along - uy * perp + _fold(loiter_x, -400, 400) * arrived
        ey = uy * along + ux * perp + _fold(loiter_y, -400, 400) * arrived
        lon = _fold(start.lon + ex / self.mdeg[0], lon0, lon1)
        lat = _fold(start.lat + ey / self.mdeg[1], lat0, lat1)
        start_us = _draw_start_us(rng, spec, (n - 1) * dt_us)
        t_us = start_us + np.arange(n, dtype=np.int64) * dt_us
        return t_us, lon, lat, None


def _cap_length(n: int, dt_us: int, spec: DatasetSpec) -> int:
    """Trips must fit entirely inside the declared time extent."""
    span = spec.time_extent.end_us - spec.time_extent.start_us
    max_n = (span - 1) // dt_us + 1
    return max(2, min(n, int(max_n)))


_MODELS = {"cycling": _CyclingModel, "aviation": _AviationModel, "ais": _AisModel}


# ---------------------------------------------------------------------------
# dataset generation


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """Emit whole trips until total points reach the scale factor."""
    features = generate_supporting_features(spec.scenario, spec.seed, spec.bbox)
    model = _MODELS[spec.scenario](spec, features)
    rng = np.random.default_rng([spec.seed, 1])
    n_objects = max(2, int(round(spec.scale_factor / spec.trip_points_mean / 3)))

    t_parts, lon_parts, lat_parts, alt_parts = [], [], [], []
    row_parts, seq_parts = [], []
    trips: list[Trip] = []
    total = 0
    while total < spec.scale_factor:
        n = _draw_length(rng, spec)
        t_us, lon, lat, alt = model.make_trip(rng, n)
        n = len(t_us)
        row = len(trips)
        trip_id = f"{_TRIP_PREFIX[spec.scenario]}-{row:06d}"
        object_id = f"{_OBJECT_PREFIX[spec.scenario]}-{int(rng.integers(n_objects)):05d}"
        trips.append(Trip(
            trip_id=trip_id, object_id=object_id,
            start_t=from_us(int(t_us[0])), end_t=from_us(int(t_us[-1])),
            start_point=GeoPoint(float(lon[0]), float(lat[0])),
            end_point=GeoPoint(float(lon[-1]), float(lat[-1])),
            n_points=n,
        ))
        t_parts.append(t_us)
        lon_parts.append(lon)
        lat_parts.append(lat)
        if alt is not None:
            alt_parts.append(alt)
        row_parts.append(np.full(n, row, dtype=np.int64))
        seq_parts.append(np.arange(n, dtype=np.int64))
        total += n

    cols = InstantColumns(
        trip_row=np.concatenate(row_parts),
        seq=np.concatenate(seq_parts),
        t_us=np.concatenate(t_parts),
        lon=np.concatenate(lon_parts),
        lat=np.concatenate(lat_parts),
        alt=np.concatenate(alt_parts) if alt_parts else None,
    )
    stats = compute_stats(spec.scenario, cols, trips, features)
    return Dataset(spec.scenario, cols, trips, features, stats)


def compute_stats(scenario: str, cols: InstantColumns, trips: list[Trip],
                  features: list[SupportingFeature]) -> DatasetStats:
    names: dict[str, tuple[str, ...]] = {}
    for f in features:
        names.setdefault(f.kind, ())
        names[f.kind] = names[f.kind] + (f.name,)
    return DatasetStats(
        scenario=scenario,
        total_points=len(cols),
        total_trips=len(trips),
        avg_points_per_trip=len(cols) / len(trips),
        time_extent=Period(from_us(int(cols.t_us.min())), from_us(int(cols.t_us.max()) + 1)),
        bbox=(float(cols.lon.min()), float(cols.lat.min()),
              float(cols.lon.max()), float(cols.lat.max())),
        feature_names={k: tuple(sorted(v)) for k, v in names.items()},
    )


# ---------------------------------------------------------------------------
# on-disk format


INSTANTS_FILE = "instants.csv"
TRIPS_FILE = "trips.csv"
FEATURES_FILE = "features.geojson"
STATS_FILE = "stats.json"


def _iso_column(t_us: np.ndarray) -> list[str]:
    return [s + "Z" for s in np.datetime_as_string(t_us.astype("datetime64[us]"), unit="us")]


def write_dataset(ds: Dataset, path: str) -> None:
    """Write instants.csv, trips.csv, features.geojson, and stats.json."""
    if not ds.trips:
        raise DatasetError("refusing to write a dataset with no trips")
    os.makedirs(path, exist_ok=True)
    cols = ds.instants
    has_alt = cols.alt is not None
    iso = _iso_column(cols.t_us)
    trip_ids = [t.trip_id for t in ds.trips]
    with open(os.path.join(path, INSTANTS_FILE), "w", newline="") as fh:
        fh.write("trip_id,seq,t,lon,lat,alt\n" if has_alt else "trip_id,seq,t,lon,lat\n")
        seq = cols.seq
        lon, lat = cols.lon.tolist(), cols.lat.tolist()
        rows = cols.trip_row
        if has_alt:
            alt = cols.alt.tolist()
            for i in range(len(cols)):
                fh.write(f"{trip_ids[rows[i]]},{seq[i]},{iso[i]},{lon[i]!r},{lat[i]!r},{alt[i]!r}\n")
        else:
            for i in range(len(cols)):
                fh.write(f"{trip_ids[rows[i]]},{seq[i]},{iso[i]},{lon[i]!r},{lat[i]!r}\n")
    with open(os.path.join(path, TRIPS_FILE), "w", newline="") as fh:
        fh.write("trip_id,object_id,start_t,end_t,start_lon,start_lat,end_lon,end_lat,n_points\n")
        for t in ds.trips:
            fh.write(f"{t.trip_id},{t.object_id},{iso_utc(t.start_t)},{iso_utc(t.end_t)},"
                     f"{t.start_point.lon!r},{t.start_point.lat!r},"
                     f"{t.end_point.lon!r},{t.end_point.lat!r},{t.n_points}\n")
    write_features(ds.features, os.path.join(path, FEATURES_FILE))
    with open(os.path.join(path, STATS_FILE), "w") as fh:
        json.dump(stats_to_dict(ds.stats), fh, indent=2, sort_keys=True)
        fh.write("\n")


def stats_to_dict(stats: DatasetStats) -> dict:
    return {
        "scenario": stats.scenario,
        "total_points": stats.total_points,
        "total_trips": stats.total_trips,
        "avg_points_per_trip": stats.avg_points_per_trip,
        "time_extent": {"start": iso_utc(stats.time_extent.start),
                        "end": iso_utc(stats.time_extent.end)},
        "bbox": list(stats.bbox),
        "feature_names": {k: list(v) for k, v in sorted(stats.feature_names.items())},
    }


def stats_from_dict(d: dict) -> DatasetStats:
    try:
        return DatasetStats(
            scenario=d["scenario"],
            total_points=int(d["total_points"]),
            total_trips=int(d["total_trips"]),
            avg_points_per_trip=float(d["avg_points_per_trip"]),
            time_extent=Period(parse_iso(d["time_extent"]["start"]),
                               parse_iso(d["time_extent"]["end"])),
            bbox=tuple(d["bbox"]),
            feature_names={k: tuple(v) for k, v in d["feature_names"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"malformed stats file: {exc}") from exc


def read_dataset(path: str) -> Dataset:
    """Inverse of write_dataset; truncated or inconsistent files are rejected."""
    stats_path = os.path.join(path, STATS_FILE)
    try:
        with open(stats_path) as fh:
            stats = stats_from_dict(json.load(fh))
    except FileNotFoundError:
        raise DatasetError(f"missing {STATS_FILE} in {path}")
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{stats_path}: invalid JSON at line {exc.lineno}") from exc

    trips: list[Trip] = []
    trip_index: dict[str, int] = {}
    tpath = os.path.join(path, TRIPS_FILE)
    with open(tpath, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["trip_id", "object_id", "start_t", "end_t", "start_lon",
                      "start_lat", "end_lon", "end_lat", "n_points"]:
            raise DatasetError(f"{tpath}: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 9:
                raise DatasetError(f"{tpath}:{lineno}: expected 9 fields, got {len(row)}")
            try:
                trip = Trip(
                    trip_id=row[0], object_id=row[1],
                    start_t=parse_iso(row[2]), end_t=parse_iso(row[3]),
                    start_point=GeoPoint(float(row[4]), float(row[5])),
                    end_point=GeoPoint(float(row[6]), float(row[7])),
                    n_points=int(row[8]),
                )
            except (ValueError, GeoBenchError) as exc:
                raise DatasetError(f"{tpath}:{lineno}: {exc}") from exc
            trip_index[trip.trip_id] = len(trips)
            trips.append(trip)

    ipath = os.path.join(path, INSTANTS_FILE)
    trip_row, seq, t_us, lon, lat, alt = [], [], [], [], [], []
    with open(ipath, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header == ["trip_id", "seq", "t", "lon", "lat", "alt"]:
            has_alt = True
        elif header == ["trip_id", "seq", "t", "lon", "lat"]:
            has_alt = False
        else:
            raise DatasetError(f"{ipath}: unexpected header {header}")
        want = 6 if has_alt else 5
        for lineno, row in enumerate(reader, start=2):
            if len(row) != want:
                raise DatasetError(f"{ipath}:{lineno}: expected {want} fields, got {len(row)}")
            try:
                trip_row.append(trip_index[row[0]])
            except KeyError:
                raise DatasetError(f"{ipath}:{lineno}: unknown trip_id {row[0]!r}")
            try:
                seq.append(int(row[1]))
                t_us.append(to_us(parse_iso(row[2])))
                lon.append(float(row[3]))
                lat.append(float(row[4]))
                if has_alt:
                    alt.append(float(row[5]))
            except ValueError as exc:
                raise DatasetError(f"{ipath}:{lineno}: {exc}") from exc

    cols = InstantColumns(
        trip_row=np.asarray(trip_row, dtype=np.int64),
        seq=np.asarray(seq, dtype=np.int64),
        t_us=np.asarray(t_us, dtype=np.int64),
        lon=np.asarray(lon, dtype=np.float64),
        lat=np.asarray(lat, dtype=np.float64),
        alt=np.asarray(alt, dtype=np.float64) if has_alt else None,
    )
    if stats.total_points != len(cols) or stats.total_trips != len(trips):
        raise DatasetError(
            f"{path}: stats disagree with data "
            f"({stats.total_points}/{stats.total_trips} vs {len(cols)}/{len(trips)})")
    features = load_features(os.path.join(path, FEATURES_FILE))
    return Dataset(stats.scenario, cols, trips, features, stats)


def write_features(features: Sequence[SupportingFeature], path: str) -> None:
    feats = []
    for f in features:
        if isinstance(f.geometry, Polygon):
            ring = [[v.lon, v.lat] for v in f.geometry.vertices]
            ring.append(ring[0])
            geom = {"type": "Polygon", "coordinates": [ring]}
        else:
            geom = {"type": "Point", "coordinates": [f.geometry.lon, f.geometry.lat]}
        feats.append({"type": "Feature",
                      "properties": {"name": f.name, "kind": f.kind},
                      "geometry": geom})
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh, indent=2)
        fh.write("\n")


def load_features(path: str) -> list[SupportingFeature]:
    """Parse the GeoJSON subset: FeatureCollection of Point/Polygon features
    carrying {name, kind} properties."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    if doc.get("type") != "FeatureCollection" or "features" not in doc:
        raise DatasetError(f"{path}: not a FeatureCollection")
    out = []
    seen = set()
    for i, feat in enumerate(doc["features"]):
        props = feat.get("properties") or {}
        name, kind = props.get("name"), props.get("kind")
        if not name or not kind:
            raise DatasetError(f"{path}: feature {i} lacks name/kind properties")
        if kind not in FEATURE_KINDS:
            raise DatasetError(f"{path}: feature {i} has unknown kind {kind!r}")
        if (kind, name) in seen:
            raise DatasetError(f"{path}: duplicate feature ({kind}, {name})")
        seen.add((kind, name))
        geom = feat.get("geometry") or {}
        gtype, coords = geom.get("type"), geom.get("coordinates")
        if gtype == "Point":
            geometry: object = GeoPoint(float(coords[0]), float(coords[1]))
        elif gtype == "Polygon":
            ring = coords[0]
            if len(ring) < 4 or ring[0] != ring[-1]:
                raise DatasetError(f"{path}: feature {i} polygon ring is not closed")
            geometry = Polygon([GeoPoint(float(x), float(y)) for x, y in ring])
        else:
            raise DatasetError(f"{path}: feature {i} has unsupported geometry {gtype!r}")
        out.append(SupportingFeature(name, kind, geometry))
    return out
