"""Turn point-to-point trip records into transition streams over grid cells.

Trips (pickup and dropoff coordinates) are snapped to a square grid laid over
a bounding box with an equirectangular projection at the box's mid-latitude.
Cells visited too rarely are dropped, the survivors are renumbered densely,
and consecutive trips are chained into walk runs whenever one trip's dropoff
cell is the next trip's pickup cell. Each trip contributes one transition;
chaining only merges the shared junction state so that downstream visit
statistics count it once.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6371000.0

TRIP_COLUMNS = ("pickup_lat", "pickup_lon", "dropoff_lat", "dropoff_lon")


@dataclass(frozen=True)
class GridSpec:
    """Square grid over a latitude/longitude bounding box.

    Cells are cell_m meters on a side in the equirectangular projection at
    the box's mid-latitude; cell ids are row-major with the
    (lat_min, lon_min) corner in cell 0.
    """

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    cell_m: float

    def __post_init__(self):
        if not (-90.0 <= self.lat_min < self.lat_max <= 90.0):
            raise ValueError("need -90 <= lat_min < lat_max <= 90")
        if not (-180.0 <= self.lon_min < self.lon_max <= 180.0):
            raise ValueError("need -180 <= lon_min < lon_max <= 180")
        if self.cell_m <= 0.0:
            raise ValueError(f"cell size must be positive, got {self.cell_m}")

    @property
    def meters_per_deg_lat(self) -> float:
        return EARTH_RADIUS_M * math.pi / 180.0

    @property
    def meters_per_deg_lon(self) -> float:
        mid = 0.5 * (self.lat_min + self.lat_max)
        return EARTH_RADIUS_M * math.cos(math.radians(mid)) * math.pi / 180.0

    @property
    def n_rows(self) -> int:
        extent = (self.lat_max - self.lat_min) * self.meters_per_deg_lat
        return max(int(math.ceil(extent / self.cell_m)), 1)

    @property
    def n_cols(self) -> int:
        extent = (self.lon_max - self.lon_min) * self.meters_per_deg_lon
        return max(int(math.ceil(extent / self.cell_m)), 1)

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols


@dataclass(frozen=True)
class TripRecord:
    """One trip: pickup and dropoff coordinates in degrees."""

    pickup_lat: float
    pickup_lon: float
    dropoff_lat: float
    dropoff_lon: float

    def as_row(self) -> tuple:
        return (self.pickup_lat, self.pickup_lon,
                self.dropoff_lat, self.dropoff_lon)


@dataclass(frozen=True)
class IngestResult:
    """Streams built from trips: walk runs, their transitions, and the cell map.

    runs are state sequences (0-based dense states); pairs are all
    within-run transitions, one per kept trip; cell_ids maps each dense state
    back to its raw grid cell id (ascending).
    """

    runs: list
    pairs: np.ndarray
    cell_ids: np.ndarray
    report: dict

    @property
    def m(self) -> int:
        return self.cell_ids.shape[0]


def _cells_of(spec: GridSpec, lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
    """Raw cell ids for coordinate arrays; -1 marks points outside the box."""
    rows = np.floor((lat - spec.lat_min) * spec.meters_per_deg_lat / spec.cell_m)
    cols = np.floor((lon - spec.lon_min) * spec.meters_per_deg_lon / spec.cell_m)
    inside = (lat >= spec.lat_min) & (lat <= spec.lat_max) \
        & (lon >= spec.lon_min) & (lon <= spec.lon_max)
    rows = np.clip(rows, 0, spec.n_rows - 1).astype(np.int64)
    cols = np.clip(cols, 0, spec.n_cols - 1).astype(np.int64)
    ids = rows * spec.n_cols + cols
    ids[~inside] = -1
    return ids


def grid_index(spec: GridSpec, lat: float, lon: float) -> int:
    """Raw cell id of one point; the (lat_min, lon_min) corner maps to 0."""
    ids = _cells_of(spec, np.array([float(lat)]), np.array([float(lon)]))
    if ids[0] < 0:
        raise ValueError(f"point ({lat}, {lon}) lies outside the bounding box")
    return int(ids[0])


def load_trips(path) -> np.ndarray:
    """Read a trip CSV with columns pickup_lat,pickup_lon,dropoff_lat,dropoff_lon.

    Extra columns are ignored; rows are kept in file order. Returns an (n, 4)
    float array in the column order above.
    """
    rows: list = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        missing = [c for c in TRIP_COLUMNS if c not in names]
        if missing:
            raise ValueError(f"trip file {path} is missing columns: {missing}")
        for record in reader:
            rows.append([float(record[c]) for c in TRIP_COLUMNS])
    return np.array(rows, dtype=float).reshape(-1, 4)


def _as_trip_array(trips) -> np.ndarray:
    if isinstance(trips, np.ndarray):
        arr = np.asarray(trips, dtype=float)
    else:
        arr = np.array([t.as_row() if isinstance(t, TripRecord) else tuple(t)
                        for t in trips], dtype=float).reshape(-1, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"trips must be an (n, 4) array, got shape {arr.shape}")
    return arr


def build_stream(trips, spec: GridSpec, min_visits: int = 100,
                 chain: bool = True) -> IngestResult:
    """Map trips to grid cells, prune rare cells, and build walk runs.

    Both endpoints of every kept trip must fall inside the bounding box and in
    a cell with at least min_visits endpoint visits (counted over in-box
    trips). Survivors are renumbered densely by ascending raw cell id. With
    chain=True, consecutive kept trips are merged into one run whenever the
    earlier dropoff cell equals the later pickup cell, so the junction state
    appears once; with chain=False every trip is its own two-state run. The
    transition pairs are identical either way, one per kept trip.
    """
    arr = _as_trip_array(trips)
    n_read = arr.shape[0]
    pick = _cells_of(spec, arr[:, 0], arr[:, 1])
    drop = _cells_of(spec, arr[:, 2], arr[:, 3])
    in_box = (pick >= 0) & (drop >= 0)
    pick, drop = pick[in_box], drop[in_box]

    counts = np.bincount(np.concatenate([pick, drop]), minlength=spec.n_cells)
    keep_cell = counts >= min_visits
    cell_ids = np.nonzero(keep_cell)[0]
    if cell_ids.size == 0:
        raise ValueError(
            f"no cells survive the visit threshold min_visits={min_visits}; "
            f"max endpoint visits over {int((counts > 0).sum())} touched cells "
            f"is {int(counts.max()) if counts.size else 0}"
        )
    kept = keep_cell[pick] & keep_cell[drop]
    pick, drop = pick[kept], drop[kept]

    dense = np.full(spec.n_cells, -1, dtype=np.int64)
    dense[cell_ids] = np.arange(cell_ids.size)
    src = dense[pick]
    dst = dense[drop]

    runs: list = []
    if src.size:
        if chain:
            breaks = np.nonzero(src[1:] != dst[:-1])[0] + 1
            starts = np.concatenate([[0], breaks])
            ends = np.concatenate([breaks, [src.size]])
            for a, b in zip(starts, ends):
                runs.append(np.concatenate([src[a:b], dst[b - 1 : b]]))
        else:
            runs = [np.array([s, d], dtype=np.int64)
                    for s, d in zip(src, dst)]
    pairs = np.stack([src, dst], axis=1) if src.size else \
        np.empty((0, 2), dtype=np.int64)

    report = {
        "trips_read": int(n_read),
        "trips_in_box": int(in_box.sum()),
        "trips_kept": int(src.size),
        "cells_touched": int((counts > 0).sum()),
        "cells_kept": int(cell_ids.size),
        "min_visits": int(min_visits),
        "runs": len(runs),
        "states": int(cell_ids.size),
        "chained": bool(chain),
        "grid_rows": spec.n_rows,
        "grid_cols": spec.n_cols,
        "cell_m": float(spec.cell_m),
    }
    return IngestResult(runs=runs, pairs=pairs, cell_ids=cell_ids, report=report)
