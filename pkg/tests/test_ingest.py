"""Trip ingestion: grid geometry, CSV loading, cell pruning, and run chaining."""

from __future__ import annotations

import numpy as np
import pytest

import walkfactor as wf

# one-degree box near the equator, 4 rows by 4 cols of ~27.8 km cells
BOX = dict(lat_min=0.0, lat_max=1.0, lon_min=10.0, lon_max=11.0)


def small_grid(cell_m: float = 27800.0) -> wf.GridSpec:
    return wf.GridSpec(cell_m=cell_m, **BOX)


def cell_center(spec: wf.GridSpec, row: int, col: int) -> tuple:
    lat = spec.lat_min + (row + 0.5) * spec.cell_m / spec.meters_per_deg_lat
    lon = spec.lon_min + (col + 0.5) * spec.cell_m / spec.meters_per_deg_lon
    return lat, lon


def trip_between(spec: wf.GridSpec, a: tuple, b: tuple) -> tuple:
    lat0, lon0 = cell_center(spec, *a)
    lat1, lon1 = cell_center(spec, *b)
    return (lat0, lon0, lat1, lon1)


def test_grid_spec_geometry():
    spec = small_grid()
    assert spec.n_rows == 4
    assert spec.n_cols == 4
    assert spec.n_cells == 16
    assert spec.meters_per_deg_lat == pytest.approx(111194.9, rel=1e-4)
    # at mid-latitude 0.5 degrees the longitude scale is barely compressed
    assert spec.meters_per_deg_lon < spec.meters_per_deg_lat
    assert spec.meters_per_deg_lon == pytest.approx(111190.7, rel=1e-4)


def test_grid_spec_validation():
    with pytest.raises(ValueError, match="lat_min"):
        wf.GridSpec(2.0, 1.0, 10.0, 11.0, 500.0)
    with pytest.raises(ValueError, match="lon_min"):
        wf.GridSpec(0.0, 1.0, 11.0, 10.0, 500.0)
    with pytest.raises(ValueError, match="cell size"):
        wf.GridSpec(0.0, 1.0, 10.0, 11.0, 0.0)


def test_grid_index_corners_and_row_major_order():
    spec = small_grid()
    assert wf.grid_index(spec, spec.lat_min, spec.lon_min) == 0
    lat, lon = cell_center(spec, 2, 3)
    assert wf.grid_index(spec, lat, lon) == 2 * 4 + 3
    # the far corner is clipped into the last cell, not pushed past it
    assert wf.grid_index(spec, spec.lat_max, spec.lon_max) == 15


def test_grid_index_rejects_outside_points():
    spec = small_grid()
    with pytest.raises(ValueError, match="outside the bounding box"):
        wf.grid_index(spec, 5.0, 10.5)


def test_load_trips_reads_columns_and_ignores_extras(tmp_path):
    path = tmp_path / "trips.csv"
    path.write_text(
        "fare,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon\n"
        "7.5,0.1,10.1,0.2,10.2\n"
        "3.0,0.3,10.3,0.4,10.4\n"
    )
    trips = wf.load_trips(path)
    np.testing.assert_allclose(trips, [[0.1, 10.1, 0.2, 10.2],
                                       [0.3, 10.3, 0.4, 10.4]])


def test_load_trips_reports_missing_columns(tmp_path):
    path = tmp_path / "trips.csv"
    path.write_text("pickup_lat,pickup_lon\n0.1,10.1\n")
    with pytest.raises(ValueError, match="dropoff_lat"):
        wf.load_trips(path)


def test_load_trips_empty_file_gives_empty_array(tmp_path):
    path = tmp_path / "trips.csv"
    path.write_text("pickup_lat,pickup_lon,dropoff_lat,dropoff_lon\n")
    assert wf.load_trips(path).shape == (0, 4)


def test_build_stream_drops_out_of_box_trips():
    spec = small_grid()
    good = trip_between(spec, (0, 0), (1, 1))
    bad = (5.0, 10.5, 0.5, 10.5)
    result = wf.build_stream([good, good, bad], spec, min_visits=1)
    assert result.report["trips_read"] == 3
    assert result.report["trips_in_box"] == 2
    assert result.report["trips_kept"] == 2


def test_build_stream_prunes_rare_cells_and_renumbers_densely():
    spec = small_grid()
    busy = trip_between(spec, (3, 3), (0, 0))
    rare = trip_between(spec, (0, 0), (1, 2))
    trips = [busy] * 5 + [rare]
    result = wf.build_stream(trips, spec, min_visits=3)
    # cells (0,0) id 0 and (3,3) id 15 survive; (1,2) id 6 sees one visit
    np.testing.assert_array_equal(result.cell_ids, [0, 15])
    assert result.m == 2
    assert result.report["cells_touched"] == 3
    assert result.report["cells_kept"] == 2
    # dense states follow ascending raw cell id: 0 -> 0, 15 -> 1
    np.testing.assert_array_equal(result.pairs, [[1, 0]] * 5)


def test_build_stream_chains_consecutive_trips():
    spec = small_grid()
    a, b, c = (0, 0), (1, 1), (2, 2)
    trips = [trip_between(spec, a, b), trip_between(spec, b, c),
             trip_between(spec, c, a), trip_between(spec, b, a)]
    result = wf.build_stream(trips, spec, min_visits=1)
    # first three trips chain a -> b -> c -> a; the fourth starts a new run
    assert result.report["runs"] == 2
    assert [run.tolist() for run in result.runs] == [[0, 1, 2, 0], [1, 0]]
    np.testing.assert_array_equal(result.pairs,
                                  [[0, 1], [1, 2], [2, 0], [1, 0]])


def test_build_stream_run_lengths_count_junctions_once():
    spec = small_grid()
    a, b = (0, 0), (3, 3)
    trips = [trip_between(spec, a, b), trip_between(spec, b, a)] * 150
    result = wf.build_stream(trips, spec, min_visits=100)
    assert result.report["runs"] == 1
    assert result.runs[0].size == 300 + 1
    # total run length always equals kept trips plus the number of runs
    assert sum(r.size for r in result.runs) == \
        result.report["trips_kept"] + result.report["runs"]


def test_build_stream_unchained_pairs_match_chained():
    spec = small_grid()
    a, b, c = (0, 0), (1, 1), (2, 2)
    trips = [trip_between(spec, a, b), trip_between(spec, b, c),
             trip_between(spec, a, c)]
    chained = wf.build_stream(trips, spec, min_visits=1, chain=True)
    flat = wf.build_stream(trips, spec, min_visits=1, chain=False)
    np.testing.assert_array_equal(chained.pairs, flat.pairs)
    assert flat.report["runs"] == 3
    assert all(run.size == 2 for run in flat.runs)
    assert not flat.report["chained"]


def test_build_stream_reports_empty_survivor_set():
    spec = small_grid()
    trips = [trip_between(spec, (0, 0), (1, 1))]
    with pytest.raises(ValueError, match="min_visits=100"):
        wf.build_stream(trips, spec)


def test_build_stream_validates_trip_shape():
    spec = small_grid()
    with pytest.raises(ValueError, match=r"\(n, 4\)"):
        wf.build_stream(np.zeros((3, 3)), spec, min_visits=1)


def test_build_stream_accepts_trip_records():
    spec = small_grid()
    rec = wf.TripRecord(*trip_between(spec, (0, 0), (1, 1)))
    result = wf.build_stream([rec], spec, min_visits=1)
    assert result.report["trips_kept"] == 1
    np.testing.assert_array_equal(result.pairs, [[0, 1]])
