"""Pipeline configuration.

One JSON document drives every subcommand. Precedence, highest first:
command-line flags, then config keys, then the defaults below. Relative
paths inside the config resolve against the config file's directory; paths
given on the command line resolve against the working directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .models.cv import FAMILIES

DEFAULT_SEARCH_SPACES: dict[str, dict[str, Any]] = {
    "ridge": {"lam": {"low": 1e-4, "high": 1e2}},
    "lasso": {"lam": {"low": 1e-4, "high": 1e2}},
}


@dataclass
class RfeConfig:
    enabled: bool = False
    n_keep: int = 10
    step: int = 1
    scope: str = "combined"  # "combined" or "per_group"

    def __post_init__(self):
        if self.scope not in ("combined", "per_group"):
            raise ConfigError("rfe.scope must be 'combined' or 'per_group'")
        if self.n_keep < 1 or self.step < 1:
            raise ConfigError("rfe.n_keep and rfe.step must be >= 1")


@dataclass
class SearchConfig:
    enabled: bool = True
    n_iter: int = 10
    families: list[str] = field(default_factory=lambda: ["ridge", "lasso"])
    spaces: dict[str, dict[str, Any]] = field(default_factory=lambda: dict(DEFAULT_SEARCH_SPACES))


@dataclass
class PipelineConfig:
    seed: int
    out_dir: Path
    base_dir: Path = field(default_factory=Path.cwd)
    inputs: dict[str, Any] = field(default_factory=dict)
    synth: dict[str, Any] = field(default_factory=dict)
    poi_categories: list[str] | None = None
    target: str = "wealth_index"
    family: str = "random_forest"
    params: dict[str, Any] = field(default_factory=dict)
    k: int = 5
    rfe: RfeConfig = field(default_factory=RfeConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    benchmark_families: list[str] = field(default_factory=lambda: list(FAMILIES))
    benchmark_params: dict[str, dict[str, Any]] = field(default_factory=dict)
    explain_rows: list[str] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}")
        bad = [f for f in self.benchmark_families if f not in FAMILIES]
        if bad:
            raise ConfigError(f"unknown benchmark families {bad}")
        if self.k < 2:
            raise ConfigError("cv.k must be >= 2")

    def path(self, key: str, default: str | Path) -> Path:
        """Input path for ``key``: configured value, else ``default`` under out_dir."""
        value = self.inputs.get(key)
        if value is None:
            return self.out_dir / default
        return self.resolve(value)

    def resolve(self, value: str | Path) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def raster_paths(self) -> dict[str, Path]:
        rasters = self.inputs.get("rasters")
        if rasters is None:
            scene = self.out_dir / "scene" / "rasters"
            if not scene.is_dir():
                return {}
            return {p.stem: p for p in sorted(scene.glob("*.asc"))}
        return {name: self.resolve(p) for name, p in rasters.items()}


def load_config(path: str | Path | None, seed: int | None = None, out: str | Path | None = None,
                overrides: dict[str, Any] | None = None) -> PipelineConfig:
    doc: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        base = path.resolve().parent
    if seed is None:
        seed = doc.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    if out is not None:
        out_dir = Path(out)
    elif "out" in doc:
        out_dir = Path(doc["out"]) if Path(doc["out"]).is_absolute() else base / doc["out"]
    else:
        out_dir = Path("wealthmap_out")

    model = doc.get("model", {})
    rfe = doc.get("rfe", {})
    search = doc.get("search", {})
    bench = doc.get("benchmark", {})
    try:
        cfg = PipelineConfig(
            seed=int(seed),
            out_dir=out_dir,
            base_dir=base,
            inputs=dict(doc.get("inputs", {})),
            synth=dict(doc.get("synth", {})),
            poi_categories=doc.get("poi_categories"),
            target=doc.get("target", "wealth_index"),
            family=model.get("family", "random_forest"),
            params=dict(model.get("params", {})),
            k=int(doc.get("cv", {}).get("k", 5)),
            rfe=RfeConfig(**rfe),
            search=SearchConfig(**{**{"spaces": dict(DEFAULT_SEARCH_SPACES)}, **search}),
            benchmark_families=list(bench.get("families", FAMILIES)),
            benchmark_params=dict(bench.get("params", {})),
            explain_rows=doc.get("explain", {}).get("rows"),
        )
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.__post_init__()
    return cfg
