"""In-process reference store: the 18 canonical queries as composable
primitives over two interchangeable engines.

A handle built with the baseline profile (no index, no partitioning) scans
every instant for every predicate: that is the oracle whose answers define
correctness. Indexed profiles route spatial predicates through a grid or
STR R-tree and temporal predicates through a time-sorted view, optionally
over time- or space-partitioned data. Profiles never change answers, only
execution strategy; the handle is read-only after load and safe to share
across any number of concurrent workers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..core import (
    GeoBenchError,
    GeoPoint,
    Period,
    Polygon,
    SupportingFeature,
    from_us,
    haversine_many,
    points_in_polygon,
    to_us,
    within_distance_of_polygon,
)
from ..datagen import Dataset
from .index import GridIndex, STRTree, expand_bbox_by_radius

INDEX_KINDS = ("none", "grid", "rtree")
PARTITIONING_KINDS = ("none", "time", "space")

_HOUR_US = 3_600_000_000


class StoreError(GeoBenchError):
    """Bad profile, unknown feature, or invalid primitive arguments."""


@dataclass(frozen=True)
class ConfigProfile:
    """Index variant plus partitioning strategy; answers are profile-invariant."""

    index: str = "none"
    partitioning: str = "none"
    k: int = 4

    def __post_init__(self) -> None:
        if self.index not in INDEX_KINDS:
            raise StoreError(f"unknown index kind: {self.index!r}")
        if self.partitioning not in PARTITIONING_KINDS:
            raise StoreError(f"unknown partitioning kind: {self.partitioning!r}")
        if self.k < 1:
            raise StoreError("partition count k must be >= 1")

    @property
    def label(self) -> str:
        part = self.partitioning if self.partitioning == "none" else f"{self.partitioning}({self.k})"
        return f"{self.index}/{part}"


class _Partition:
    """One slice of the instants table, optionally spatially indexed."""

    __slots__ = ("t_us", "lon", "lat", "trip_row", "t_sorted", "t_order", "index",
                 "t_min", "t_max", "bbox")

    def __init__(self, t_us, lon, lat, trip_row, index_kind: str):
        self.t_us = t_us
        self.lon = lon
        self.lat = lat
        self.trip_row = trip_row
        n = len(t_us)
        self.t_min = int(t_us.min()) if n else 0
        self.t_max = int(t_us.max()) if n else -1
        self.bbox = ((float(lon.min()), float(lat.min()), float(lon.max()), float(lat.max()))
                     if n else (1.0, 1.0, -1.0, -1.0))
        if index_kind == "none" or n == 0:
            self.index = None
            self.t_order = None
            self.t_sorted = None
        else:
            self.index = GridIndex(lon, lat) if index_kind == "grid" else STRTree(lon, lat)
            self.t_order = np.argsort(t_us, kind="stable")
            self.t_sorted = t_us[self.t_order]

    def __len__(self) -> int:
        return len(self.t_us)

    # --- temporal selection ----------------------------------------------
    def count_in_period(self, a: int, b: int) -> int:
        if self.t_sorted is not None:
            lo = np.searchsorted(self.t_sorted, a, side="left")
            hi = np.searchsorted(self.t_sorted, b, side="left")
            return int(hi - lo)
        return int(np.count_nonzero((self.t_us >= a) & (self.t_us < b)))

    def period_indices(self, a: int, b: int) -> np.ndarray:
        if self.t_order is not None:
            lo = np.searchsorted(self.t_sorted, a, side="left")
            hi = np.searchsorted(self.t_sorted, b, side="left")
            return self.t_order[lo:hi]
        return np.flatnonzero((self.t_us >= a) & (self.t_us < b))

    # --- spatial selection -------------------------------------------------
    def spatial_candidates(self, qbox: tuple[float, float, float, float]) -> np.ndarray:
        """Candidate indices for a predicate confined to qbox. The scan engine
        returns everything: its predicates always touch every instant."""
        if self.index is None:
            return np.arange(len(self.t_us), dtype=np.int64)
        return self.index.query_bbox(*qbox)


def _restrict_to_period(part: _Partition, idx: np.ndarray, period: Optional[Period]) -> np.ndarray:
    if period is None or len(idx) == 0:
        return idx
    tv = part.t_us[idx]
    return idx[(tv >= period.start_us) & (tv < period.end_us)]


AnchorRef = Union[GeoPoint, tuple]  # a literal point or a (kind, name) pair


class StoreHandle:
    """Loaded dataset (instants plus trip summaries), feature lookup, and the
    query primitives, all under one configuration profile."""

    def __init__(self, ds: Dataset, profile: ConfigProfile):
        t0 = time.perf_counter()
        self.profile = profile
        self.dataset = ds
        self.trips = ds.trips
        self.trip_ids = [t.trip_id for t in ds.trips]
        self.features = {(f.kind, f.name): f for f in ds.features}

        # trips summary table, columnar
        self.trip_start_us = np.array([to_us(t.start_t) for t in ds.trips], dtype=np.int64)
        self.trip_end_us = np.array([to_us(t.end_t) for t in ds.trips], dtype=np.int64)
        self.trip_slon = np.array([t.start_point.lon for t in ds.trips])
        self.trip_slat = np.array([t.start_point.lat for t in ds.trips])
        self.trip_elon = np.array([t.end_point.lon for t in ds.trips])
        self.trip_elat = np.array([t.end_point.lat for t in ds.trips])
        self.trip_npoints = np.array([t.n_points for t in ds.trips], dtype=np.int64)
        self._start_order = np.argsort(self.trip_start_us, kind="stable")
        self._start_sorted = self.trip_start_us[self._start_order]

        self.partitions = self._build_partitions(ds, profile)
        self.build_seconds = time.perf_counter() - t0

    # ------------------------------------------------------------------ load

    def _build_partitions(self, ds: Dataset, profile: ConfigProfile) -> list[_Partition]:
        cols = ds.instants
        if profile.partitioning == "none" or profile.k == 1:
            groups = [np.arange(len(cols), dtype=np.int64)]
        elif profile.partitioning == "time":
            groups = _time_groups(cols.t_us, profile.k)
        else:
            groups = _space_groups(cols.trip_row, self.trip_slon, self.trip_npoints, profile.k)
        return [
            _Partition(cols.t_us[g], cols.lon[g], cols.lat[g], cols.trip_row[g], profile.index)
            for g in groups
        ]

    def partition_sizes(self) -> list[int]:
        return [len(p) for p in self.partitions]

    # -------------------------------------------------------------- plumbing

    def _parts_for(self, period: Optional[Period] = None,
                   qbox: Optional[tuple] = None) -> list[_Partition]:
        """Partitions that can contribute; pruning is by actual data extent,
        so it never changes answers."""
        out = []
        for p in self.partitions:
            if len(p) == 0:
                continue
            if period is not None and (p.t_max < period.start_us or p.t_min >= period.end_us):
                continue
            if qbox is not None:
                b = p.bbox
                if b[0] > qbox[2] or b[2] < qbox[0] or b[1] > qbox[3] or b[3] < qbox[1]:
                    continue
            out.append(p)
        return out

    def _feature(self, kind: str, name: str) -> SupportingFeature:
        try:
            return self.features[(kind, name)]
        except KeyError:
            raise StoreError(f"unknown feature: kind={kind!r} name={name!r}")

    def _resolve_anchor(self, anchor: AnchorRef):
        if isinstance(anchor, GeoPoint):
            return anchor
        kind, name = anchor
        return self._feature(kind, name).geometry

    def _resolve_polygon(self, region: tuple) -> Polygon:
        kind, name = region
        geom = self._feature(kind, name).geometry
        if not isinstance(geom, Polygon):
            raise StoreError(f"feature ({kind!r}, {name!r}) is not a polygon")
        return geom

    def _resolve_point(self, anchor: AnchorRef) -> GeoPoint:
        geom = self._resolve_anchor(anchor)
        if not isinstance(geom, GeoPoint):
            raise StoreError("anchor must be a point feature")
        return geom

    def _trip_id_set(self, rows) -> set[str]:
        return {self.trip_ids[int(r)] for r in rows}

    def _started_in(self, period: Period) -> np.ndarray:
        """Trip rows whose start time falls in the period."""
        if self.profile.index != "none":
            lo = np.searchsorted(self._start_sorted, period.start_us, side="left")
            hi = np.searchsorted(self._start_sorted, period.end_us, side="left")
            return self._start_order[lo:hi]
        return np.flatnonzero((self.trip_start_us >= period.start_us)
                              & (self.trip_start_us < period.end_us))

    # ------------------------------------------------------------ primitives

    def count_instants_in_period(self, period: Period) -> int:
        a, b = period.start_us, period.end_us
        return sum(p.count_in_period(a, b) for p in self._parts_for(period))

    def count_instants_per_hour(self, period: Period) -> list[tuple]:
        acc: dict[int, int] = {}
        for p in self._parts_for(period):
            idx = p.period_indices(period.start_us, period.end_us)
            if len(idx) == 0:
                continue
            hours, counts = np.unique(p.t_us[idx] // _HOUR_US, return_counts=True)
            for h, c in zip(hours, counts):
                acc[int(h)] = acc.get(int(h), 0) + int(c)
        return [(from_us(h * _HOUR_US), acc[h]) for h in sorted(acc)]

    def distinct_active_trips(self, period: Period) -> int:
        rows: set[int] = set()
        for p in self._parts_for(period):
            idx = p.period_indices(period.start_us, period.end_us)
            rows.update(np.unique(p.trip_row[idx]).tolist())
        return len(rows)

    def active_trips_at_hour(self, hour: int, period: Period) -> int:
        if not 0 <= hour <= 23:
            raise StoreError(f"hour of day out of range: {hour}")
        rows: set[int] = set()
        for p in self._parts_for(period):
            idx = p.period_indices(period.start_us, period.end_us)
            if len(idx) == 0:
                continue
            tv = p.t_us[idx]
            at_hour = idx[(tv // _HOUR_US) % 24 == hour]
            rows.update(np.unique(p.trip_row[at_hour]).tolist())
        return len(rows)

    def trips_intersecting_region(self, region: tuple,
                                  period: Optional[Period] = None) -> set[str]:
        poly = self._resolve_polygon(region)
        qbox = poly.bbox()
        rows: set[int] = set()
        for p in self._parts_for(period, qbox):
            idx = _restrict_to_period(p, p.spatial_candidates(qbox), period)
            if len(idx) == 0:
                continue
            hit = points_in_polygon(p.lon[idx], p.lat[idx], poly)
            rows.update(np.unique(p.trip_row[idx[hit]]).tolist())
        return self._trip_id_set(rows)

    def trips_within_distance(self, anchor: AnchorRef, radius_m: float,
                              period: Optional[Period] = None) -> set[str]:
        if radius_m <= 0:
            raise StoreError("radius must be positive")
        geom = self._resolve_anchor(anchor)
        if isinstance(geom, Polygon):
            qbox = expand_bbox_by_radius(geom.bbox(), radius_m)
        else:
            qbox = expand_bbox_by_radius((geom.lon, geom.lat, geom.lon, geom.lat), radius_m)
        rows: set[int] = set()
        for p in self._parts_for(period, qbox):
            idx = _restrict_to_period(p, p.spatial_candidates(qbox), period)
            if len(idx) == 0:
                continue
            if isinstance(geom, Polygon):
                hit = within_distance_of_polygon(p.lon[idx], p.lat[idx], geom, radius_m)
            else:
                hit = haversine_many(p.lon[idx], p.lat[idx], geom) <= radius_m
            rows.update(np.unique(p.trip_row[idx[hit]]).tolist())
        return self._trip_id_set(rows)

    def nearest_trip(self, point: GeoPoint, max_distance_m: float = 50_000.0):
        """Trip with the smallest instant distance to the point, within the
        cap; ties break toward the smaller trip_id. None when nothing is in
        range."""
        if max_distance_m <= 0:
            raise StoreError("max_distance_m must be positive")
        qbox = expand_bbox_by_radius((point.lon, point.lat, point.lon, point.lat),
                                     max_distance_m)
        best: Optional[tuple[float, str]] = None
        for p in self._parts_for(None, qbox):
            idx = p.spatial_candidates(qbox)
            if len(idx) == 0:
                continue
            d = haversine_many(p.lon[idx], p.lat[idx], point)
            m = float(d.min())
            if m > max_distance_m:
                continue
            tied_rows = np.unique(p.trip_row[idx[d == m]])
            tid = min(self.trip_ids[int(r)] for r in tied_rows)
            if best is None or (m, tid) < best:
                best = (m, tid)
        if best is None:
            return None
        return best[1], best[0]

    def avg_trip_duration_started_in_period(self, period: Period) -> Optional[float]:
        rows = self._started_in(period)
        if len(rows) == 0:
            return None
        dur = (self.trip_end_us[rows] - self.trip_start_us[rows]) / 1e6
        return float(np.mean(dur))

    def avg_duration_trips_ending_near(self, anchor: AnchorRef,
                                       radius_m: float) -> Optional[float]:
        pt = self._resolve_point(anchor)
        near = haversine_many(self.trip_elon, self.trip_elat, pt) <= radius_m
        if not near.any():
            return None
        dur = (self.trip_end_us[near] - self.trip_start_us[near]) / 1e6
        return float(np.mean(dur))

    def avg_duration_trips_started_near_in_period(self, anchor: AnchorRef, radius_m: float,
                                                  period: Period) -> Optional[float]:
        pt = self._resolve_point(anchor)
        rows = self._started_in(period)
        if len(rows) == 0:
            return None
        near = haversine_many(self.trip_slon[rows], self.trip_slat[rows], pt) <= radius_m
        rows = rows[near]
        if len(rows) == 0:
            return None
        dur = (self.trip_end_us[rows] - self.trip_start_us[rows]) / 1e6
        return float(np.mean(dur))

    def trips_connecting(self, region_a: AnchorRef, region_b: AnchorRef,
                         radius_m: float) -> set[str]:
        a = self._resolve_point(region_a)
        b = self._resolve_point(region_b)
        if a == b:
            raise StoreError("start and end anchors must differ")
        m = ((haversine_many(self.trip_slon, self.trip_slat, a) <= radius_m)
             & (haversine_many(self.trip_elon, self.trip_elat, b) <= radius_m))
        return self._trip_id_set(np.flatnonzero(m))

    def trips_crossing_min_regions(self, kind: str, min_regions: int,
                                   period: Period) -> set[str]:
        polys = [f.geometry for f in self.dataset.features
                 if f.kind == kind and isinstance(f.geometry, Polygon)]
        if not polys:
            raise StoreError(f"no polygon features of kind {kind!r}")
        if min_regions < 1:
            raise StoreError("min_regions must be >= 1")
        counts: dict[int, int] = {}
        for poly in polys:
            qbox = poly.bbox()
            region_rows: set[int] = set()
            for p in self._parts_for(period, qbox):
                idx = _restrict_to_period(p, p.spatial_candidates(qbox), period)
                if len(idx) == 0:
                    continue
                hit = points_in_polygon(p.lon[idx], p.lat[idx], poly)
                region_rows.update(np.unique(p.trip_row[idx[hit]]).tolist())
            for r in region_rows:
                counts[r] = counts.get(r, 0) + 1
        return self._trip_id_set(r for r, c in counts.items() if c >= min_regions)

    def terminal_event_count(self, anchor: AnchorRef, radius_m: float,
                             period: Period) -> int:
        pt = self._resolve_point(anchor)
        a, b = period.start_us, period.end_us
        departed = ((self.trip_start_us >= a) & (self.trip_start_us < b)
                    & (haversine_many(self.trip_slon, self.trip_slat, pt) <= radius_m))
        arrived = ((self.trip_end_us >= a) & (self.trip_end_us < b)
                   & (haversine_many(self.trip_elon, self.trip_elat, pt) <= radius_m))
        return int(np.count_nonzero(departed | arrived))


def _time_groups(t_us: np.ndarray, k: int) -> list[np.ndarray]:
    """Split instants into k groups at instant-count quantiles over time."""
    n = len(t_us)
    ts = np.sort(t_us)
    bounds = [int(ts[min(n - 1, (i * n) // k)]) for i in range(1, k)]
    part = np.searchsorted(np.array(bounds), t_us, side="right")
    return [np.flatnonzero(part == i) for i in range(k)]


def _space_groups(trip_row: np.ndarray, trip_slon: np.ndarray,
                  trip_npoints: np.ndarray, k: int) -> list[np.ndarray]:
    """Assign whole trips to k groups: trips ordered by start longitude, cut
    where the cumulative instant count is nearest to each j*total/k."""
    order = np.argsort(trip_slon, kind="stable")
    cum = np.cumsum(trip_npoints[order])
    total = int(cum[-1])
    cut_rows = [int(np.argmin(np.abs(cum - total * j / k))) for j in range(1, k)]
    trip_part = np.empty(len(trip_slon), dtype=np.int64)
    prev = 0
    for part_i, cut in enumerate(cut_rows + [len(order) - 1]):
        hi = cut + 1
        trip_part[order[prev:hi]] = part_i
        prev = hi
    part_of_instant = trip_part[trip_row]
    return [np.flatnonzero(part_of_instant == i) for i in range(k)]


def load_store(ds: Dataset, profile: Optional[ConfigProfile] = None) -> StoreHandle:
    """Build indexes and partitions per profile; the handle is then read-only.
    Build time is recorded on the handle as build_seconds."""
    return StoreHandle(ds, profile or ConfigProfile())
