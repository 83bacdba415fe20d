import filecmp
import json
import os

import numpy as np
import pytest

from geobench.core import GeoPoint, Period, Polygon, point_in_polygon, parse_iso
from geobench.datagen import (
    Dataset,
    DatasetError,
    DatasetSpec,
    default_spec,
    generate_dataset,
    generate_supporting_features,
    load_features,
    read_dataset,
    write_dataset,
)


@pytest.fixture(scope="module")
def cycling_small():
    # small mean so a desk-scale dataset still has plenty of trips
    spec = default_spec("cycling", 20_000, seed=71, trip_points_mean=200.0,
                        time_extent=Period(parse_iso("2023-04-01T00:00:00Z"),
                                           parse_iso("2023-04-08T00:00:00Z")))
    return spec, generate_dataset(spec)


class TestSpecValidation:
    def test_scale_below_one_trip_rejected(self):
        with pytest.raises(DatasetError):
            default_spec("cycling", 1)

    def test_scale_below_mean_rejected(self):
        with pytest.raises(DatasetError):
            default_spec("cycling", 100)  # default mean is ~3.6k

    def test_unknown_scenario(self):
        with pytest.raises(DatasetError):
            default_spec("driving", 10_000)

    def test_degenerate_bbox(self):
        with pytest.raises(DatasetError):
            default_spec("cycling", 10_000, bbox=(13.0, 52.0, 13.0, 52.5))


class TestGeneration:
    def test_whole_trips(self, cycling_small):
        _, ds = cycling_small
        assert min(t.n_points for t in ds.trips) >= 2
        # instants of each trip are contiguous, seq strictly increasing,
        # t non-decreasing, endpoints match the trip summary
        rows = ds.instants.trip_row
        boundaries = np.flatnonzero(np.diff(rows)) + 1
        starts = np.concatenate([[0], boundaries])
        ends = np.concatenate([boundaries, [len(rows)]])
        assert len(starts) == len(ds.trips)
        for k, (a, b) in enumerate(zip(starts, ends)):
            trip = ds.trips[k]
            assert b - a == trip.n_points
            assert np.all(np.diff(ds.instants.seq[a:b]) > 0)
            assert np.all(np.diff(ds.instants.t_us[a:b]) >= 0)
            assert ds.instants.lon[a] == trip.start_point.lon
            assert ds.instants.lat[b - 1] == trip.end_point.lat

    def test_scale_property(self, cycling_small):
        spec, ds = cycling_small
        biggest = max(t.n_points for t in ds.trips)
        assert spec.scale_factor <= ds.stats.total_points < spec.scale_factor + biggest

    def test_determinism(self, cycling_small):
        spec, ds = cycling_small
        assert generate_dataset(spec) == ds

    def test_different_seed_differs(self, cycling_small):
        spec, ds = cycling_small
        other = generate_dataset(DatasetSpec(**{**spec.__dict__, "seed": spec.seed + 1}))
        assert other != ds

    def test_avg_points_within_15pct_of_mean(self):
        # scale >= 100 * mean, per the distribution property
        spec = default_spec("aviation", 21_000, seed=5)
        ds = generate_dataset(spec)
        assert ds.stats.avg_points_per_trip == pytest.approx(210.0, rel=0.15)

    def test_extent_containment(self, cycling_small):
        spec, ds = cycling_small
        assert ds.instants.t_us.min() >= spec.time_extent.start_us
        assert ds.instants.t_us.max() < spec.time_extent.end_us

    def test_bbox_containment(self, cycling_small):
        spec, ds = cycling_small
        lon0, lat0, lon1, lat1 = spec.bbox
        assert ds.instants.lon.min() >= lon0 and ds.instants.lon.max() <= lon1
        assert ds.instants.lat.min() >= lat0 and ds.instants.lat.max() <= lat1

    def test_stats_consistency(self, cycling_small):
        _, ds = cycling_small
        assert ds.stats.total_points == sum(t.n_points for t in ds.trips)
        assert ds.stats.avg_points_per_trip == ds.stats.total_points / ds.stats.total_trips

    def test_aviation_has_altitude(self):
        ds = generate_dataset(default_spec("aviation", 2_000, seed=3, trip_points_mean=150.0))
        assert ds.instants.alt is not None
        assert ds.instants.alt.min() > 0

    def test_cycling_has_no_altitude(self, cycling_small):
        _, ds = cycling_small
        assert ds.instants.alt is None


class TestSupportingFeatures:
    def test_counts_per_scenario(self):
        cyc = generate_supporting_features("cycling", 1)
        avi = generate_supporting_features("aviation", 1)
        ais = generate_supporting_features("ais", 1)

        def count(fs, kind):
            return sum(1 for f in fs if f.kind == kind)

        assert count(cyc, "district") >= 12 and count(cyc, "university") >= 5
        assert count(avi, "county") >= 30 and count(avi, "city") >= 10 and count(avi, "airport") >= 5
        assert count(ais, "island") >= 5 and count(ais, "harbor") >= 10

    def test_determinism(self):
        assert generate_supporting_features("ais", 9) == generate_supporting_features("ais", 9)

    def test_names_unique(self):
        fs = generate_supporting_features("aviation", 2)
        keys = [(f.kind, f.name) for f in fs]
        assert len(keys) == len(set(keys))

    def test_districts_tile_the_bbox(self, cycling_small):
        # every trip point lies in at least one district; interior points in
        # exactly one (shared edges are boundary-inclusive on both sides)
        _, ds = cycling_small
        districts = [f.geometry for f in ds.features if f.kind == "district"]
        rng = np.random.default_rng(0)
        idx = rng.choice(len(ds.instants), 300, replace=False)
        for i in idx:
            p = GeoPoint(float(ds.instants.lon[i]), float(ds.instants.lat[i]))
            hits = sum(point_in_polygon(p, d) for d in districts)
            assert hits == 1

    def test_county_interiors_pairwise_disjoint(self):
        fs = generate_supporting_features("aviation", 4)
        counties = [f.geometry for f in fs if f.kind == "county"]
        rng = np.random.default_rng(1)
        for poly in counties:
            lon0, lat0, lon1, lat1 = poly.bbox()
            # sample strictly interior points and check no other county claims them
            for _ in range(20):
                p = GeoPoint(float(rng.uniform(lon0, lon1)), float(rng.uniform(lat0, lat1)))
                if not point_in_polygon(p, poly):
                    continue
                others = [o for o in counties if o is not poly and point_in_polygon(p, o)]
                for o in others:
                    # tolerated only exactly on a shared boundary
                    assert any(
                        abs((b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon)) == 0
                        for a, b in o.edges()
                    )


class TestDatasetIO:
    def test_round_trip(self, cycling_small, tmp_path):
        _, ds = cycling_small
        write_dataset(ds, str(tmp_path / "d"))
        assert read_dataset(str(tmp_path / "d")) == ds

    def test_write_is_byte_deterministic(self, cycling_small, tmp_path):
        _, ds = cycling_small
        write_dataset(ds, str(tmp_path / "a"))
        write_dataset(ds, str(tmp_path / "b"))
        for name in ("instants.csv", "trips.csv", "features.geojson", "stats.json"):
            assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)

    def test_aviation_round_trip_keeps_alt(self, tmp_path):
        ds = generate_dataset(default_spec("aviation", 1_500, seed=8, trip_points_mean=120.0))
        write_dataset(ds, str(tmp_path / "avi"))
        back = read_dataset(str(tmp_path / "avi"))
        assert back == ds
        assert back.instants.alt is not None

    def test_truncated_instants_rejected(self, cycling_small, tmp_path):
        _, ds = cycling_small
        d = tmp_path / "t"
        write_dataset(ds, str(d))
        full = (d / "instants.csv").read_text()
        (d / "instants.csv").write_text(full[: len(full) // 2])
        with pytest.raises(DatasetError):
            read_dataset(str(d))

    def test_empty_dataset_rejected_at_write(self, cycling_small, tmp_path):
        _, ds = cycling_small
        empty = Dataset(ds.scenario, ds.instants, [], ds.features, ds.stats)
        with pytest.raises(DatasetError):
            write_dataset(empty, str(tmp_path / "e"))


class TestLoadFeatures:
    def test_single_point_feature(self, tmp_path):
        doc = {"type": "FeatureCollection", "features": [{
            "type": "Feature",
            "properties": {"name": "North Campus", "kind": "university"},
            "geometry": {"type": "Point", "coordinates": [13.3262, 52.5125]},
        }]}
        p = tmp_path / "f.geojson"
        p.write_text(json.dumps(doc))
        fs = load_features(str(p))
        assert len(fs) == 1
        assert fs[0].name == "North Campus"
        assert fs[0].geometry == GeoPoint(13.3262, 52.5125)

    def test_empty_collection(self, tmp_path):
        p = tmp_path / "f.geojson"
        p.write_text('{"type": "FeatureCollection", "features": []}')
        assert load_features(str(p)) == []

    def test_unclosed_ring_rejected(self, tmp_path):
        doc = {"type": "FeatureCollection", "features": [{
            "type": "Feature",
            "properties": {"name": "x", "kind": "district"},
            "geometry": {"type": "Polygon",
                         "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 1]]]},
        }]}
        p = tmp_path / "f.geojson"
        p.write_text(json.dumps(doc))
        with pytest.raises(DatasetError, match="not closed"):
            load_features(str(p))

    def test_unknown_kind_rejected(self, tmp_path):
        doc = {"type": "FeatureCollection", "features": [{
            "type": "Feature", "properties": {"name": "x", "kind": "volcano"},
            "geometry": {"type": "Point", "coordinates": [0, 0]},
        }]}
        p = tmp_path / "f.geojson"
        p.write_text(json.dumps(doc))
        with pytest.raises(DatasetError, match="kind"):
            load_features(str(p))

    def test_malformed_json_names_position(self, tmp_path):
        p = tmp_path / "f.geojson"
        p.write_text('{"type": "FeatureCollection", "features": [}')
        with pytest.raises(DatasetError, match="line"):
            load_features(str(p))

    def test_features_file_round_trip(self, cycling_small, tmp_path):
        _, ds = cycling_small
        write_dataset(ds, str(tmp_path / "d"))
        fs = load_features(str(tmp_path / "d" / "features.geojson"))
        assert fs == ds.features
