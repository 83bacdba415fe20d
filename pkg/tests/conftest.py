import numpy as np
import pytest

from geobench.core import GeoPoint, Trip, from_us
from geobench.datagen import Dataset, InstantColumns, compute_stats


def build_dataset(scenario, trip_points, features, object_ids=None):
    """Assemble a Dataset from explicit per-trip point lists.

    trip_points: dict trip_id -> list of (t_us, lon, lat) tuples.
    """
    trips = []
    rows, seqs, ts, lons, lats = [], [], [], [], []
    for row, (trip_id, pts) in enumerate(sorted(trip_points.items())):
        oid = (object_ids or {}).get(trip_id, f"obj-{row:03d}")
        trips.append(Trip(
            trip_id=trip_id, object_id=oid,
            start_t=from_us(pts[0][0]), end_t=from_us(pts[-1][0]),
            start_point=GeoPoint(pts[0][1], pts[0][2]),
            end_point=GeoPoint(pts[-1][1], pts[-1][2]),
            n_points=len(pts),
        ))
        for i, (t_us, lon, lat) in enumerate(pts):
            rows.append(row)
            seqs.append(i)
            ts.append(t_us)
            lons.append(lon)
            lats.append(lat)
    cols = InstantColumns(
        trip_row=np.asarray(rows, dtype=np.int64),
        seq=np.asarray(seqs, dtype=np.int64),
        t_us=np.asarray(ts, dtype=np.int64),
        lon=np.asarray(lons, dtype=np.float64),
        lat=np.asarray(lats, dtype=np.float64),
        alt=None,
    )
    stats = compute_stats(scenario, cols, trips, features)
    return Dataset(scenario, cols, trips, features, stats)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
