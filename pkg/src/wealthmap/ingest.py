"""Input parsing and per-cluster feature assembly."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AllMissingColumn,
    DimensionMismatch,
    DuplicateId,
    EmptyZone,
    MalformedHeader,
    MalformedRecord,
    UnknownCluster,
)
from .geo import ClusterSite, GeoPoint, SpatialIndex
from .raster import STAT_NAMES, RasterGrid, zonal_statistics

GROUPS = ("SM", "RS", "POI")
SOCIAL_SEGMENTS = ("4g", "3g", "2g", "wifi", "apple", "midhigh")


# ---------------------------------------------------------------- raster I/O

_ASC_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def read_raster(path: str | Path) -> RasterGrid:
    """Read an ESRI ASCII grid (corner or center registration)."""
    with open(path) as fh:
        text = fh.read()
    lines = text.splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and len(header) < 6:
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0].lower()
        if key not in _ASC_KEYS + ("xllcenter", "yllcenter"):
            break
        if len(parts) != 2:
            raise MalformedHeader(f"{path}: bad header line {lines[i]!r}")
        header[key] = parts[1]
        i += 1
    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        cell = float(header["cellsize"])
        nodata = float(header.get("nodata_value", "-9999"))
        if "xllcorner" in header:
            origin_lon = float(header["xllcorner"]) + 0.5 * cell
        else:
            origin_lon = float(header["xllcenter"])
        if "yllcorner" in header:
            origin_lat = float(header["yllcorner"]) + (nrows - 0.5) * cell
        else:
            origin_lat = float(header["yllcenter"]) + (nrows - 1) * cell
    except (KeyError, ValueError) as exc:
        raise MalformedHeader(f"{path}: incomplete or invalid header ({exc})") from None
    if ncols < 1 or nrows < 1 or not cell > 0:
        raise MalformedHeader(f"{path}: non-positive dimensions")
    body = " ".join(lines[i:]).split()
    if len(body) != ncols * nrows:
        raise DimensionMismatch(f"{path}: header declares {ncols * nrows} cells, body has {len(body)}")
    try:
        values = np.array([float(tok) for tok in body], dtype=np.float64)
    except ValueError as exc:
        raise MalformedRecord(f"{path}: {exc}") from None
    return RasterGrid(origin_lat, origin_lon, cell, nrows, ncols, nodata, values)


def _corner_for(origin: float, offset_cells: float, cell: float, sign: float) -> float:
    # find a corner value the reader maps back to exactly ``origin``
    corner = origin - sign * offset_cells * cell
    for _ in range(64):
        back = corner + sign * offset_cells * cell
        if back == origin:
            return corner
        corner = np.nextafter(corner, np.inf if back < origin else -np.inf)
    return origin - sign * offset_cells * cell


def write_raster(path: str | Path, grid: RasterGrid) -> None:
    xll = _corner_for(grid.origin_lon_deg, 0.5, grid.cell_deg, 1.0)
    yll = _corner_for(grid.origin_lat_deg, grid.n_rows - 0.5, grid.cell_deg, 1.0)
    with open(path, "w") as fh:
        fh.write(f"ncols {grid.n_cols}\n")
        fh.write(f"nrows {grid.n_rows}\n")
        fh.write(f"xllcorner {float(xll)!r}\n")
        fh.write(f"yllcorner {float(yll)!r}\n")
        fh.write(f"cellsize {grid.cell_deg!r}\n")
        fh.write(f"NODATA_value {grid.nodata!r}\n")
        for row in grid.values:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


# ---------------------------------------------------------------- POI / social

@dataclass(frozen=True)
class PoiRecord:
    category: str
    location: GeoPoint
    attributes: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.category:
            raise MalformedRecord("POI category must be nonempty")


@dataclass(frozen=True)
class SocialRecord:
    cluster_id: str
    total_users: int
    users_4g: int = 0
    users_3g: int = 0
    users_2g: int = 0
    users_wifi: int = 0
    users_apple: int = 0
    users_midhigh_consumer: int = 0

    def __post_init__(self):
        if self.total_users < 0:
            raise MalformedRecord(f"{self.cluster_id}: total_users is negative")
        for name, s in self.segments().items():
            if s < 0:
                raise MalformedRecord(f"{self.cluster_id}: {name} count is negative")
            if s > self.total_users:
                raise MalformedRecord(f"{self.cluster_id}: segment count exceeds total_users")

    def segments(self) -> dict[str, int]:
        return {
            "4g": self.users_4g,
            "3g": self.users_3g,
            "2g": self.users_2g,
            "wifi": self.users_wifi,
            "apple": self.users_apple,
            "midhigh": self.users_midhigh_consumer,
        }


def read_pois(path: str | Path) -> list[PoiRecord]:
    records = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "category"):
                continue
            if len(row) not in (3, 4):
                raise MalformedRecord(f"{path}:{lineno}: expected category,lat,lon[,attrs]")
            attrs: dict[str, float] = {}
            if len(row) == 4 and row[3].strip():
                for item in row[3].split(";"):
                    if not item.strip():
                        continue
                    key, sep, val = item.partition("=")
                    if not sep:
                        raise MalformedRecord(f"{path}:{lineno}: attribute {item!r} lacks '='")
                    try:
                        attrs[key.strip()] = float(val)
                    except ValueError:
                        raise MalformedRecord(f"{path}:{lineno}: bad attribute value {val!r}") from None
            try:
                pt = GeoPoint(float(row[1]), float(row[2]))
            except ValueError as exc:
                raise MalformedRecord(f"{path}:{lineno}: {exc}") from None
            records.append(PoiRecord(row[0].strip(), pt, attrs))
    return records


def write_pois(path: str | Path, records: Iterable[PoiRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["category", "lat", "lon", "attributes"])
        for r in records:
            attrs = ";".join(f"{k}={v!r}" for k, v in sorted(r.attributes.items()))
            w.writerow([r.category, repr(r.location.lat_deg), repr(r.location.lon_deg), attrs])


SOCIAL_HEADER = ["cluster_id", "total", "4g", "3g", "2g", "wifi", "apple", "midhigh"]


def read_social(path: str | Path) -> list[SocialRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != SOCIAL_HEADER:
            raise MalformedHeader(f"{path}: expected header {','.join(SOCIAL_HEADER)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SOCIAL_HEADER):
                raise MalformedRecord(f"{path}:{lineno}: expected {len(SOCIAL_HEADER)} fields")
            try:
                counts = [int(float(v)) for v in row[1:]]
            except ValueError as exc:
                raise MalformedRecord(f"{path}:{lineno}: {exc}") from None
            out.append(SocialRecord(row[0].strip(), *counts))
    return out


def write_social(path: str | Path, records: Iterable[SocialRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SOCIAL_HEADER)
        for r in records:
            w.writerow([r.cluster_id, r.total_users, *r.segments().values()])


# ---------------------------------------------------------------- feature matrix

@dataclass
class FeatureMatrix:
    """Per-cluster feature table; NaN marks a missing cell."""

    row_ids: list[str]
    columns: list[str]
    groups: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(len(self.row_ids), len(self.columns))
        if len(self.groups) != len(self.columns):
            raise DimensionMismatch("one source-group tag per column required")
        if len(set(self.columns)) != len(self.columns):
            raise DuplicateId("column names must be unique")
        if len(set(self.row_ids)) != len(self.row_ids):
            raise DuplicateId("row ids must be unique")
        bad = set(self.groups) - set(GROUPS)
        if bad:
            raise MalformedRecord(f"unknown source groups {sorted(bad)}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select_groups(self, groups: Iterable[str]) -> "FeatureMatrix":
        wanted = set(groups)
        idx = [j for j, g in enumerate(self.groups) if g in wanted]
        return self.select_columns([self.columns[j] for j in idx])

    def select_columns(self, names: Sequence[str]) -> "FeatureMatrix":
        idx = [self.columns.index(n) for n in names]
        return FeatureMatrix(
            list(self.row_ids), [self.columns[j] for j in idx], [self.groups[j] for j in idx],
            self.values[:, idx].copy(),
        )

    def select_rows(self, ids: Sequence[str]) -> "FeatureMatrix":
        pos = {r: i for i, r in enumerate(self.row_ids)}
        try:
            idx = [pos[r] for r in ids]
        except KeyError as exc:
            raise UnknownCluster(f"no feature row for cluster {exc.args[0]!r}") from None
        return FeatureMatrix(list(ids), list(self.columns), list(self.groups), self.values[idx].copy())

    @staticmethod
    def concat(parts: Sequence["FeatureMatrix"]) -> "FeatureMatrix":
        first = parts[0]
        for p in parts[1:]:
            if p.row_ids != first.row_ids:
                raise DimensionMismatch("row ids differ between concatenated matrices")
        return FeatureMatrix(
            list(first.row_ids),
            [c for p in parts for c in p.columns],
            [g for p in parts for g in p.groups],
            np.hstack([p.values for p in parts]) if parts else np.empty((0, 0)),
        )

    def equals(self, other: "FeatureMatrix") -> bool:
        return (
            self.row_ids == other.row_ids
            and self.columns == other.columns
            and self.groups == other.groups
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cluster_id", *self.columns])
            w.writerow(["group", *self.groups])
            for rid, row in zip(self.row_ids, self.values):
                w.writerow([rid, *("" if math.isnan(v) else repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            names = next(reader, None)
            groups = next(reader, None)
            if not names or not groups or names[0] != "cluster_id" or groups[0] != "group":
                raise MalformedHeader(f"{path}: expected two header rows (cluster_id..., group...)")
            if len(names) != len(groups):
                raise MalformedHeader(f"{path}: header rows differ in length")
            ids, rows = [], []
            for lineno, row in enumerate(reader, start=3):
                if not row:
                    continue
                if len(row) != len(names):
                    raise DimensionMismatch(f"{path}:{lineno}: expected {len(names)} fields")
                ids.append(row[0])
                try:
                    rows.append([float(v) if v.strip() else math.nan for v in row[1:]])
                except ValueError as exc:
                    raise MalformedRecord(f"{path}:{lineno}: {exc}") from None
        values = np.array(rows, dtype=np.float64).reshape(len(ids), len(names) - 1)
        return cls(ids, names[1:], groups[1:], values)


def _poi_sort_key(rec: PoiRecord):
    return (rec.category, rec.location.lat_deg, rec.location.lon_deg, sorted(rec.attributes.items()))


def assemble_features(
    clusters: Sequence[ClusterSite],
    rasters: Mapping[str, RasterGrid],
    pois: Sequence[PoiRecord],
    social: Sequence[SocialRecord],
    poi_categories: Sequence[str] | None = None,
) -> FeatureMatrix:
    """Build the cluster x feature table from the three source families.

    Column blocks are SM, then RS (rasters in name order), then POI
    (categories in sorted order unless ``poi_categories`` is given).
    Raster zones without cloudless cells, clusters without a social record
    and attribute shares with no in-radius records are left missing.
    """
    ids = [c.id for c in clusters]
    if len(set(ids)) != len(ids):
        raise DuplicateId("cluster ids must be unique")
    known = set(ids)
    social_by_id: dict[str, SocialRecord] = {}
    for rec in social:
        if rec.cluster_id not in known:
            raise UnknownCluster(f"social record for unknown cluster {rec.cluster_id!r}")
        if rec.cluster_id in social_by_id:
            raise DuplicateId(f"duplicate social record for {rec.cluster_id!r}")
        social_by_id[rec.cluster_id] = rec

    n = len(clusters)
    blocks: list[FeatureMatrix] = []

    # SM
    sm_cols = ["sm_total_users"] + [f"sm_share_{s}" for s in SOCIAL_SEGMENTS]
    sm = np.full((n, len(sm_cols)), np.nan)
    for i, c in enumerate(clusters):
        rec = social_by_id.get(c.id)
        if rec is None:
            continue
        sm[i, 0] = rec.total_users
        for j, count in enumerate(rec.segments().values(), start=1):
            sm[i, j] = count / rec.total_users if rec.total_users > 0 else 0.0
    blocks.append(FeatureMatrix(ids, sm_cols, ["SM"] * len(sm_cols), sm))

    # RS
    rs_cols = [f"{name}_{stat}" for name in sorted(rasters) for stat in STAT_NAMES]
    rs = np.full((n, len(rs_cols)), np.nan)
    for k, name in enumerate(sorted(rasters)):
        grid = rasters[name]
        for i, c in enumerate(clusters):
            try:
                stats = zonal_statistics(grid, c.centroid, c.radius_m)
            except EmptyZone:
                continue
            rs[i, k * len(STAT_NAMES):(k + 1) * len(STAT_NAMES)] = stats.as_tuple()
    blocks.append(FeatureMatrix(ids, rs_cols, ["RS"] * len(rs_cols), rs))

    # POI
    ordered = sorted(pois, key=_poi_sort_key)
    cats = sorted({p.category for p in ordered}) if poi_categories is None else list(poi_categories)
    attrs_by_cat: dict[str, list[str]] = {
        cat: sorted({a for p in ordered if p.category == cat for a in p.attributes}) for cat in cats
    }
    poi_cols: list[str] = []
    for cat in cats:
        poi_cols.append(f"poi_{cat}_count")
        poi_cols.extend(f"poi_{cat}_share_{a}" for a in attrs_by_cat[cat])
    col_pos = {name: j for j, name in enumerate(poi_cols)}
    poi = np.full((n, len(poi_cols)), np.nan)
    index = SpatialIndex((str(i), p.location) for i, p in enumerate(ordered))
    for i, c in enumerate(clusters):
        hits = index.query_indices(c.centroid, c.radius_m)
        by_cat: dict[str, list[PoiRecord]] = {}
        for h in hits:
            rec = ordered[h]
            by_cat.setdefault(rec.category, []).append(rec)
        for cat in cats:
            found = by_cat.get(cat, [])
            poi[i, col_pos[f"poi_{cat}_count"]] = len(found)
            if not found:
                continue
            for a in attrs_by_cat[cat]:
                present = [r.attributes[a] for r in found if a in r.attributes]
                if present:
                    poi[i, col_pos[f"poi_{cat}_share_{a}"]] = math.fsum(present) / len(present)
    blocks.append(FeatureMatrix(ids, poi_cols, ["POI"] * len(poi_cols), poi))

    return FeatureMatrix.concat(blocks)


def column_means(values: np.ndarray, columns: Sequence[str] | None = None) -> np.ndarray:
    """Means over non-missing rows; raises AllMissingColumn for empty columns."""
    values = np.asarray(values, dtype=np.float64)
    present = ~np.isnan(values)
    counts = present.sum(axis=0)
    if np.any(counts == 0):
        j = int(np.flatnonzero(counts == 0)[0])
        name = columns[j] if columns is not None else f"#{j}"
        raise AllMissingColumn(f"column {name} has no non-missing values")
    return np.where(present, values, 0.0).sum(axis=0) / counts


def fill_missing(values: np.ndarray, means: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.where(np.isnan(values), means[None, :], values)


def impute_missing(matrix: FeatureMatrix) -> FeatureMatrix:
    means = column_means(matrix.values, matrix.columns)
    return FeatureMatrix(
        list(matrix.row_ids), list(matrix.columns), list(matrix.groups),
        fill_missing(matrix.values, means),
    )
