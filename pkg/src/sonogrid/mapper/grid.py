"""Heat grid: inverse-distance-weighted dB field over a lat/lon bounding box."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from ..errors import ValidationError
from ..kernels import EARTH_RADIUS_M, idw_fill
from .state import NodeState

MAX_GRID_EDGE = 512


@dataclass(frozen=True)
class GridSpec:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    rows: int = 128
    cols: int = 128

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max) or not (self.lon_min < self.lon_max):
            raise ValidationError("bbox must have lat_min < lat_max and lon_min < lon_max")
        for edge in (self.rows, self.cols):
            if not (1 <= edge <= MAX_GRID_EDGE):
                raise ValidationError(f"grid edges must be in [1, {MAX_GRID_EDGE}]")

    def cell_lats(self) -> np.ndarray:
        """Row-center latitudes, row 0 at lat_min."""
        step = (self.lat_max - self.lat_min) / self.rows
        return self.lat_min + (np.arange(self.rows) + 0.5) * step

    def cell_lons(self) -> np.ndarray:
        step = (self.lon_max - self.lon_min) / self.cols
        return self.lon_min + (np.arange(self.cols) + 0.5) * step

    def to_json(self) -> dict[str, Any]:
        return {
            "bbox": {
                "lat_min": self.lat_min,
                "lat_max": self.lat_max,
                "lon_min": self.lon_min,
                "lon_max": self.lon_max,
            },
            "rows": self.rows,
            "cols": self.cols,
        }


@dataclass(frozen=True)
class IdwParams:
    power: float = 2.0
    radius_m: float = 2000.0
    snap_m: float = 1.0

    def __post_init__(self) -> None:
        if not (self.power > 0):
            raise ValidationError("idw power must be positive")


@dataclass(frozen=True)
class HeatGrid:
    spec: GridSpec
    values: np.ndarray  # rows x cols float64, NaN where absent
    generated_at_ms: int

    def value_at(self, row: int, col: int) -> float | None:
        v = self.values[row, col]
        return None if math.isnan(v) else float(v)

    def cell_of(self, lat: float, lon: float) -> tuple[int, int]:
        """Grid cell containing a coordinate (clamped to the bbox edge)."""
        s = self.spec
        row = int((lat - s.lat_min) / (s.lat_max - s.lat_min) * s.rows)
        col = int((lon - s.lon_min) / (s.lon_max - s.lon_min) * s.cols)
        return min(max(row, 0), s.rows - 1), min(max(col, 0), s.cols - 1)

    def to_json(self) -> dict[str, Any]:
        flat = [
            None if math.isnan(v) else round(float(v), 2) for v in self.values.ravel()
        ]
        return {
            **self.spec.to_json(),
            "generated_at": self.generated_at_ms,
            "values": flat,  # row-major, null = no data (0 dB is a real level)
        }


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters (sphere radius 6,371,000 m).

    Coordinate differences convert to radians after subtraction, matching
    the kernels bit for bit on symmetric geometry.
    """
    dlat = math.radians(lat2 - lat1)
    dlon = math.radians(lon2 - lon1)
    h = (
        math.sin(dlat / 2.0) ** 2
        + math.cos(math.radians(lat1)) * math.cos(math.radians(lat2)) * math.sin(dlon / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(min(max(h, 0.0), 1.0)))


def idw_interpolate(
    nodes: Iterable[NodeState] | Sequence[tuple[float, float, float]],
    spec: GridSpec,
    params: IdwParams = IdwParams(),
    generated_at_ms: int = 0,
) -> HeatGrid:
    """Inverse-distance-weighted grid over the live nodes.

    Cells within ``snap_m`` of a node take its value exactly; cells with
    no node inside ``radius_m`` stay absent. No nodes at all yields an
    all-absent grid, which renders as an empty overlay.
    """
    lats, lons, vals = [], [], []
    for node in nodes:
        if isinstance(node, NodeState):
            lats.append(node.lat)
            lons.append(node.lon)
            vals.append(node.spl_db)
        else:
            lat, lon, value = node
            lats.append(lat)
            lons.append(lon)
            vals.append(value)
    out = np.empty((spec.rows, spec.cols), dtype=np.float64)
    idw_fill(
        np.asarray(lats, dtype=np.float64),
        np.asarray(lons, dtype=np.float64),
        np.asarray(vals, dtype=np.float64),
        np.asarray(spec.cell_lats(), dtype=np.float64),
        np.asarray(spec.cell_lons(), dtype=np.float64),
        params.power,
        params.radius_m,
        params.snap_m,
        out,
    )
    return HeatGrid(spec=spec, values=out, generated_at_ms=generated_at_ms)
