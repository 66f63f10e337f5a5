"""Georeferenced grids and zonal summary statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyZone, InputError, NegativeRadius
from .geo import EARTH_RADIUS_M, GeoPoint, haversine_array

STAT_NAMES = ("mean", "maximum", "minimum", "variance", "skewness", "kurtosis")

_DEGENERATE_M2 = 1e-12


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """Row-major grid; ``origin_*`` is the center of the top-left cell.

    Rows run north to south, columns west to east.
    """

    origin_lat_deg: float
    origin_lon_deg: float
    cell_deg: float
    n_rows: int
    n_cols: int
    nodata: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            if vals.size != self.n_rows * self.n_cols:
                raise DimensionMismatch(
                    f"{vals.size} values for a {self.n_rows}x{self.n_cols} grid"
                )
            vals = vals.reshape(self.n_rows, self.n_cols)
        if vals.shape != (self.n_rows, self.n_cols):
            raise DimensionMismatch(f"values shape {vals.shape} != ({self.n_rows}, {self.n_cols})")
        if not self.cell_deg > 0:
            raise InputError("cell_deg must be > 0")
        if self.n_rows < 1 or self.n_cols < 1:
            raise InputError("raster must have at least one cell")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        if not isinstance(other, RasterGrid):
            return NotImplemented
        return (
            self.origin_lat_deg == other.origin_lat_deg
            and self.origin_lon_deg == other.origin_lon_deg
            and self.cell_deg == other.cell_deg
            and self.n_rows == other.n_rows
            and self.n_cols == other.n_cols
            and self.nodata == other.nodata
            and np.array_equal(self.values, other.values)
        )

    def cell_center(self, row, col):
        lat = self.origin_lat_deg - np.asarray(row) * self.cell_deg
        lon = self.origin_lon_deg + np.asarray(col) * self.cell_deg
        return lat, lon

    def valid_mask(self) -> np.ndarray:
        return ~((self.values == self.nodata) | np.isnan(self.values))


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    maximum: float
    minimum: float
    variance: float
    skewness: float
    kurtosis: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in STAT_NAMES)


def summarize(values: np.ndarray) -> SummaryStats:
    """Population moments; Fisher-Pearson skewness and excess kurtosis."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise EmptyZone("no cloudless cells in zone")
    lo, hi = float(v.min()), float(v.max())
    mean = min(max(float(v.mean()), lo), hi)
    d = v - mean
    d2 = d * d
    m2 = float(d2.mean())
    if v.size == 1 or m2 < _DEGENERATE_M2:
        skew = kurt = 0.0
        if v.size == 1:
            m2 = 0.0
    else:
        m3 = float((d2 * d).mean())
        m4 = float((d2 * d2).mean())
        skew = m3 / m2**1.5
        kurt = m4 / (m2 * m2) - 3.0
    return SummaryStats(int(v.size), mean, hi, lo, m2, skew, kurt)


def zone_cells(raster: RasterGrid, center: GeoPoint, radius_m: float) -> tuple[np.ndarray, np.ndarray]:
    """(rows, cols) of cells whose center lies within ``radius_m`` of ``center``.

    nodata cells are included here; filtering happens in zonal_statistics.
    """
    if radius_m < 0:
        raise NegativeRadius(f"radius must be >= 0, got {radius_m}")
    delta = radius_m / EARTH_RADIUS_M
    dlat = math.degrees(delta) * 1.001 + 1e-9
    lat_hi = center.lat_deg + dlat
    lat_lo = center.lat_deg - dlat
    r0 = max(int(math.floor((raster.origin_lat_deg - lat_hi) / raster.cell_deg)), 0)
    r1 = min(int(math.ceil((raster.origin_lat_deg - lat_lo) / raster.cell_deg)), raster.n_rows - 1)
    if lat_lo <= -90.0 or lat_hi >= 90.0 or delta >= math.pi / 2:
        c0, c1 = 0, raster.n_cols - 1
    else:
        s = math.sin(delta) / math.cos(math.radians(abs(center.lat_deg)))
        if s >= 1.0:
            c0, c1 = 0, raster.n_cols - 1
        else:
            dlon = math.degrees(math.asin(s)) * 1.001 + 1e-9
            c0 = max(int(math.floor((center.lon_deg - dlon - raster.origin_lon_deg) / raster.cell_deg)), 0)
            c1 = min(int(math.ceil((center.lon_deg + dlon - raster.origin_lon_deg) / raster.cell_deg)),
                     raster.n_cols - 1)
    if r0 > r1 or c0 > c1:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    rows, cols = np.meshgrid(np.arange(r0, r1 + 1), np.arange(c0, c1 + 1), indexing="ij")
    rows, cols = rows.ravel(), cols.ravel()
    lat, lon = raster.cell_center(rows, cols)
    d = haversine_array(center.lat_deg, center.lon_deg, lat, lon)
    keep = d <= radius_m
    return rows[keep], cols[keep]


def zonal_statistics(raster: RasterGrid, center: GeoPoint, radius_m: float) -> SummaryStats:
    """Summary of cloudless cells whose center falls within the radius."""
    if not radius_m > 0:
        raise NegativeRadius(f"zonal radius must be > 0, got {radius_m}")
    rows, cols = zone_cells(raster, center, radius_m)
    vals = raster.values[rows, cols]
    vals = vals[(vals != raster.nodata) & ~np.isnan(vals)]
    if vals.size == 0:
        raise EmptyZone(
            f"no cloudless cells within {radius_m} m of ({center.lat_deg}, {center.lon_deg})"
        )
    return summarize(vals)
