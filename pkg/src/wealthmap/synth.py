"""Seeded synthetic scenes with a known latent wealth factor.

Each cluster draws latent wealth w ~ N(0, 1). Every source family sees a
noisy, partial view of w:

* rasters: a nightlight bump whose brightness grows with w, a warm
  temperature anomaly and a vegetation dip, plus background noise and ~5%
  cloud (nodata) cells;
* POIs: wealth-linked categories with Poisson(base * exp(a * w)) counts near
  the centroid, plus uniform background clutter; schools carry has_water;
* social: user totals and segment counts whose shares are logistic in w;
* households: assets ~ Bernoulli(logistic(c_i * w_h + d_i)), c_i > 0, where
  w_h is the cluster's w plus household-level scatter.

latent_wealth is only written to a separate test-only directory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geo import EARTH_RADIUS_M, ClusterSite, GeoPoint, Urbanity, write_clusters
from .ingest import PoiRecord, SocialRecord, write_pois, write_raster, write_social
from .raster import RasterGrid
from .targets import HouseholdRecord, write_households

NODATA = -9999.0

# category -> (base intensity, wealth slope)
DEFAULT_POI_CATEGORIES: dict[str, tuple[float, float]] = {
    "bank": (0.6, 1.0),
    "restaurant": (2.0, 0.7),
    "convenience_store": (2.5, 0.4),
    "supermarket": (0.5, 1.1),
    "hospital": (0.3, 0.6),
    "public_school": (1.5, 0.0),
}


@dataclass(frozen=True)
class SceneConfig:
    n_clusters: int = 1000
    households_per_cluster: int = 20
    n_assets: int = 10
    lat_min: float = 10.0
    lon_min: float = 120.0
    extent_deg: float = 5.0
    cell_deg: float = 0.01
    cloud_fraction: float = 0.05
    poi_categories: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_POI_CATEGORIES)
    )
    noise_sd: float = 1.6
    household_sd: float = 1.0
    asset_slope: float = 1.2
    seed: int = 0

    def __post_init__(self):
        for name in ("n_clusters", "households_per_cluster", "n_assets"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.noise_sd < 0 or self.household_sd < 0:
            raise ConfigError("noise levels must be >= 0")
        if not self.cell_deg > 0 or not self.extent_deg > 0:
            raise ConfigError("raster extent and cell size must be positive")
        if not 0 <= self.cloud_fraction < 1:
            raise ConfigError("cloud_fraction must lie in [0, 1)")

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneConfig":
        doc = dict(doc)
        if "poi_categories" in doc:
            doc["poi_categories"] = {k: tuple(v) for k, v in doc["poi_categories"].items()}
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"bad synth config: {exc}") from None


@dataclass
class SyntheticScene:
    config: SceneConfig
    clusters: list[ClusterSite]
    households: list[HouseholdRecord]
    rasters: dict[str, RasterGrid]
    pois: list[PoiRecord]
    social: list[SocialRecord]
    latent_wealth: np.ndarray

    def write(self, out_dir: str | Path, testonly_dir: str | Path | None = None) -> dict[str, Path]:
        out = Path(out_dir)
        (out / "rasters").mkdir(parents=True, exist_ok=True)
        paths = {
            "clusters": out / "clusters.csv",
            "households": out / "households.csv",
            "pois": out / "pois.csv",
            "social": out / "social.csv",
        }
        write_clusters(paths["clusters"], self.clusters)
        write_households(paths["households"], self.households)
        write_pois(paths["pois"], self.pois)
        write_social(paths["social"], self.social)
        for name, grid in self.rasters.items():
            paths[f"raster:{name}"] = out / "rasters" / f"{name}.asc"
            write_raster(paths[f"raster:{name}"], grid)
        testonly = Path(testonly_dir) if testonly_dir is not None else out / "testonly"
        testonly.mkdir(parents=True, exist_ok=True)
        paths["latent_wealth"] = testonly / "latent_wealth.csv"
        with open(paths["latent_wealth"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cluster_id", "latent_wealth"])
            for c, lw in zip(self.clusters, self.latent_wealth):
                w.writerow([c.id, repr(float(lw))])
        return paths


def _logistic(z):
    return 1.0 / (1.0 + np.exp(-z))


def _offset_point(lat: float, lon: float, dist_m: float, bearing: float) -> tuple[float, float]:
    dlat = dist_m * math.cos(bearing) / EARTH_RADIUS_M
    dlon = dist_m * math.sin(bearing) / (EARTH_RADIUS_M * math.cos(math.radians(lat)))
    return lat + math.degrees(dlat), lon + math.degrees(dlon)


def _add_bumps(grid: np.ndarray, cfg: SceneConfig, lats, lons, amps, sigma_m) -> None:
    n_rows, n_cols = grid.shape
    top = cfg.lat_min + cfg.extent_deg - cfg.cell_deg / 2
    left = cfg.lon_min + cfg.cell_deg / 2
    for lat, lon, amp, sig in zip(lats, lons, amps, sigma_m):
        reach = 4 * sig / 111_000.0
        r0 = max(int((top - (lat + reach)) / cfg.cell_deg), 0)
        r1 = min(int((top - (lat - reach)) / cfg.cell_deg) + 1, n_rows)
        c0 = max(int((lon - reach / math.cos(math.radians(lat)) - left) / cfg.cell_deg), 0)
        c1 = min(int((lon + reach / math.cos(math.radians(lat)) - left) / cfg.cell_deg) + 1, n_cols)
        if r0 >= r1 or c0 >= c1:
            continue
        rl = top - np.arange(r0, r1) * cfg.cell_deg
        cl = left + np.arange(c0, c1) * cfg.cell_deg
        dy = (rl[:, None] - lat) * 111_000.0
        dx = (cl[None, :] - lon) * 111_000.0 * math.cos(math.radians(lat))
        grid[r0:r1, c0:c1] += amp * np.exp(-(dx * dx + dy * dy) / (2 * sig * sig))


def generate_scene(config: SceneConfig) -> SyntheticScene:
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_clusters
    noise = cfg.noise_sd

    w = rng.standard_normal(n)
    margin = 0.1
    lats = np.round(cfg.lat_min + margin + rng.random(n) * (cfg.extent_deg - 2 * margin), 6)
    lons = np.round(cfg.lon_min + margin + rng.random(n) * (cfg.extent_deg - 2 * margin), 6)
    urban = rng.random(n) < _logistic(0.8 * w - 0.6)
    ids = [f"C{i:04d}" for i in range(n)]
    clusters = [
        ClusterSite(ids[i], GeoPoint(lats[i], lons[i]), Urbanity.URBAN if urban[i] else Urbanity.RURAL)
        for i in range(n)
    ]
    sigma = np.where(urban, 2400.0, 6000.0)

    # rasters
    n_side = int(round(cfg.extent_deg / cfg.cell_deg))
    shape = (n_side, n_side)
    ntl = 0.3 + 0.15 * np.abs(rng.standard_normal(shape))
    _add_bumps(ntl, cfg, lats, lons, np.exp(1.0 * w + 0.3 * noise * rng.standard_normal(n)) * 6.0, sigma)
    # per-pixel flicker: zone means average it out, extremes do not
    ntl *= np.exp(0.5 * rng.standard_normal(shape))
    lst = 27.0 + 0.8 * rng.standard_normal(shape)
    _add_bumps(lst, cfg, lats, lons, 1.5 * w + 1.2 * noise * rng.standard_normal(n) + 1.0, sigma)
    ndvi = 0.55 + 0.08 * rng.standard_normal(shape)
    _add_bumps(ndvi, cfg, lats, lons, -(0.08 * w + 0.1 * noise * rng.standard_normal(n) + 0.1), sigma)
    rasters = {}
    for name, arr in (("lst", lst), ("ndvi", ndvi), ("ntl", ntl)):
        arr = np.round(arr, 4)
        arr[rng.random(shape) < cfg.cloud_fraction] = NODATA
        rasters[name] = RasterGrid(
            float(np.round(cfg.lat_min + cfg.extent_deg - cfg.cell_deg / 2, 10)),
            float(np.round(cfg.lon_min + cfg.cell_deg / 2, 10)),
            cfg.cell_deg, n_side, n_side, NODATA, arr,
        )

    # POIs
    pois: list[PoiRecord] = []
    radii = np.where(urban, 2000.0, 5000.0)
    for i in range(n):
        eps = noise * rng.standard_normal()
        for cat, (base, slope) in cfg.poi_categories.items():
            k = int(rng.poisson(base * math.exp(slope * w[i] + 0.5 * slope * eps)))
            for _ in range(k):
                d = radii[i] * 0.9 * math.sqrt(rng.random())
                plat, plon = _offset_point(lats[i], lons[i], d, rng.random() * 2 * math.pi)
                attrs = {}
                if cat == "public_school":
                    attrs["has_water"] = float(rng.random() < _logistic(1.2 * w[i] + noise * rng.standard_normal()))
                pois.append(PoiRecord(cat, GeoPoint(round(plat, 6), round(plon, 6)), attrs))
    n_clutter = n * 2
    cats = list(cfg.poi_categories)
    for _ in range(n_clutter):
        cat = cats[int(rng.integers(len(cats)))]
        attrs = {"has_water": float(rng.random() < 0.5)} if cat == "public_school" else {}
        pois.append(PoiRecord(
            cat,
            GeoPoint(round(cfg.lat_min + rng.random() * cfg.extent_deg, 6),
                     round(cfg.lon_min + rng.random() * cfg.extent_deg, 6)),
            attrs,
        ))

    # social
    social = []
    share_params = {  # segment -> (slope, intercept)
        "4g": (0.9, -0.3),
        "3g": (0.2, 0.2),
        "2g": (-0.6, -1.0),
        "wifi": (0.7, -0.5),
        "apple": (0.8, -2.0),
        "midhigh": (0.7, -1.2),
    }
    for i in range(n):
        total = int(rng.poisson(400 * math.exp(0.3 * w[i] + 0.3 * noise * rng.standard_normal())))
        counts = {}
        for seg, (slope, icpt) in share_params.items():
            share = _logistic(slope * w[i] + icpt + 0.8 * noise * rng.standard_normal())
            counts[seg] = int(rng.binomial(total, share))
        social.append(SocialRecord(ids[i], total, counts["4g"], counts["3g"], counts["2g"],
                                   counts["wifi"], counts["apple"], counts["midhigh"]))

    # households
    slopes = cfg.asset_slope * (0.6 + 0.8 * rng.random(cfg.n_assets))
    intercepts = rng.normal(0.0, 1.0, cfg.n_assets)
    households = []
    for i in range(n):
        wh = w[i] + cfg.household_sd * rng.standard_normal(cfg.households_per_cluster)
        probs = _logistic(slopes[None, :] * wh[:, None] + intercepts[None, :])
        assets = (rng.random(probs.shape) < probs).astype(np.float64)
        toilet = rng.random(len(wh)) < _logistic(-0.9 * wh - 0.3)
        water = rng.random(len(wh)) < _logistic(0.6 * wh + 1.0)
        edu = rng.random(len(wh)) < _logistic(0.9 * wh - 0.6)
        for h in range(len(wh)):
            households.append(HouseholdRecord(ids[i], tuple(assets[h]), int(toilet[h]), int(water[h]), int(edu[h])))

    return SyntheticScene(cfg, clusters, households, rasters, pois, social, w)
