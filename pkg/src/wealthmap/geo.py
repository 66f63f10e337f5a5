"""Great-circle distance and exact radius queries over point sets."""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DuplicateId, InvalidCoordinate, MalformedHeader, MalformedRecord, NegativeRadius

EARTH_RADIUS_M = 6_371_000.0
URBAN_RADIUS_M = 2000.0
RURAL_RADIUS_M = 5000.0


@dataclass(frozen=True)
class GeoPoint:
    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        lat, lon = float(self.lat_deg), float(self.lon_deg)
        if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
            raise InvalidCoordinate(f"coordinate out of range: ({lat}, {lon})")
        object.__setattr__(self, "lat_deg", lat)
        object.__setattr__(self, "lon_deg", lon)


class Urbanity(enum.Enum):
    URBAN = "urban"
    RURAL = "rural"

    @classmethod
    def parse(cls, text: str) -> "Urbanity":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise MalformedRecord(f"urbanity must be urban or rural, got {text!r}") from None


@dataclass(frozen=True)
class ClusterSite:
    id: str
    centroid: GeoPoint
    urbanity: Urbanity

    @property
    def radius_m(self) -> float:
        return radius_m(self)


def radius_m(site: ClusterSite) -> float:
    """Query radius for a cluster: 2 km when urban, 5 km when rural."""
    return URBAN_RADIUS_M if site.urbanity is Urbanity.URBAN else RURAL_RADIUS_M


def haversine_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorised haversine distance in meters; inputs in degrees, broadcastable.

    Every distance in the package goes through this function so that index
    queries and brute-force scans agree bit-for-bit.
    """
    phi1 = np.radians(np.asarray(lat1, dtype=np.float64))
    phi2 = np.radians(np.asarray(lat2, dtype=np.float64))
    dphi = phi2 - phi1
    dlam = np.radians(np.asarray(lon2, dtype=np.float64) - np.asarray(lon1, dtype=np.float64))
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    h = np.clip(h, 0.0, 1.0)
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(h))


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    if a == b:
        return 0.0
    d = haversine_array(
        np.array([a.lat_deg]), np.array([a.lon_deg]), np.array([b.lat_deg]), np.array([b.lon_deg])
    )
    return float(d[0])


class SpatialIndex:
    """Immutable lat/lon bucket grid with exact haversine filtering.

    Bucketing only prunes candidates; membership is always decided by
    :func:`haversine_array`, so results equal a brute-force scan.
    """

    def __init__(self, entries: Iterable[tuple[str, GeoPoint]], cell_deg: float = 0.1):
        ids: list[str] = []
        lats: list[float] = []
        lons: list[float] = []
        seen: set[str] = set()
        for pid, pt in entries:
            if pid in seen:
                raise DuplicateId(f"duplicate point id {pid!r}")
            seen.add(pid)
            ids.append(pid)
            lats.append(pt.lat_deg)
            lons.append(pt.lon_deg)
        self._ids = ids
        self._lat = np.asarray(lats, dtype=np.float64)
        self._lon = np.asarray(lons, dtype=np.float64)
        self._cell = float(cell_deg)
        self._n_lon_cells = int(math.ceil(360.0 / self._cell))
        buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i in range(len(ids)):
            buckets[self._key(lats[i], lons[i])].append(i)
        self._buckets = {k: np.asarray(v, dtype=np.int64) for k, v in buckets.items()}

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def _key(self, lat: float, lon: float) -> tuple[int, int]:
        return (int(math.floor((lat + 90.0) / self._cell)),
                int(math.floor((lon + 180.0) / self._cell)) % self._n_lon_cells)

    def _candidates(self, center: GeoPoint, radius: float) -> np.ndarray:
        n = len(self._ids)
        delta = radius / EARTH_RADIUS_M
        # padded so floating error never excludes a true member
        dlat = math.degrees(delta) * 1.001 + 1e-9
        lat_lo = center.lat_deg - dlat
        lat_hi = center.lat_deg + dlat
        if delta >= math.pi / 2 or lat_lo <= -90.0 or lat_hi >= 90.0:
            lon_all = True
            dlon = 180.0
        else:
            cos_lat = math.cos(math.radians(abs(center.lat_deg)))
            s = math.sin(delta) / cos_lat
            if s >= 1.0:
                lon_all, dlon = True, 180.0
            else:
                dlon = math.degrees(math.asin(s)) * 1.001 + 1e-9
                lon_all = dlon >= 180.0
        i_lo = int(math.floor((max(lat_lo, -90.0) + 90.0) / self._cell))
        i_hi = int(math.floor((min(lat_hi, 90.0) + 90.0) / self._cell))
        if lon_all:
            j_range = None
            n_j = self._n_lon_cells
        else:
            j_lo = int(math.floor((center.lon_deg - dlon + 180.0) / self._cell))
            j_hi = int(math.floor((center.lon_deg + dlon + 180.0) / self._cell))
            n_j = min(j_hi - j_lo + 1, self._n_lon_cells)
            j_range = range(j_lo, j_lo + n_j)
        if (i_hi - i_lo + 1) * n_j > len(self._buckets):
            # scanning buckets directly is cheaper than enumerating the window
            if lon_all:
                keys = [k for k in self._buckets if i_lo <= k[0] <= i_hi]
            else:
                js = {j % self._n_lon_cells for j in j_range}
                keys = [k for k in self._buckets if i_lo <= k[0] <= i_hi and k[1] in js]
        else:
            js = range(self._n_lon_cells) if lon_all else [j % self._n_lon_cells for j in j_range]
            keys = [(i, j) for i in range(i_lo, i_hi + 1) for j in js if (i, j) in self._buckets]
        if not keys:
            return np.empty(0, dtype=np.int64)
        if len(keys) == len(self._buckets):
            return np.arange(n, dtype=np.int64)
        return np.concatenate([self._buckets[k] for k in keys])

    def query_indices(self, center: GeoPoint, radius: float) -> np.ndarray:
        if radius < 0:
            raise NegativeRadius(f"radius must be >= 0, got {radius}")
        if not self._ids:
            return np.empty(0, dtype=np.int64)
        cand = self._candidates(center, float(radius))
        if cand.size == 0:
            return cand
        d = haversine_array(center.lat_deg, center.lon_deg, self._lat[cand], self._lon[cand])
        return np.sort(cand[d <= radius])

    def query(self, center: GeoPoint, radius: float) -> set[str]:
        return {self._ids[i] for i in self.query_indices(center, radius)}


def build_spatial_index(entries: Iterable[tuple[str, GeoPoint]]) -> SpatialIndex:
    return SpatialIndex(entries)


def radius_query(index: SpatialIndex, center: GeoPoint, radius_m: float) -> set[str]:
    """Ids of all indexed points within ``radius_m`` meters (inclusive)."""
    return index.query(center, radius_m)


CLUSTER_HEADER = ["cluster_id", "lat", "lon", "urbanity"]


def read_clusters(path: str | Path) -> list[ClusterSite]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != CLUSTER_HEADER:
            raise MalformedHeader(f"{path}: expected header {','.join(CLUSTER_HEADER)}")
        sites = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedRecord(f"{path}:{lineno}: expected 4 fields")
            cid = row[0].strip()
            if cid in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate cluster id {cid!r}")
            seen.add(cid)
            try:
                pt = GeoPoint(float(row[1]), float(row[2]))
            except ValueError as exc:
                raise MalformedRecord(f"{path}:{lineno}: {exc}") from None
            sites.append(ClusterSite(cid, pt, Urbanity.parse(row[3])))
    return sites


def write_clusters(path: str | Path, sites: Iterable[ClusterSite]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLUSTER_HEADER)
        for s in sites:
            w.writerow([s.id, repr(s.centroid.lat_deg), repr(s.centroid.lon_deg), s.urbanity.value])
