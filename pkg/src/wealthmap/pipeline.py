"""Pipeline stages behind the CLI subcommands.

Each stage reads its inputs from files and writes its outputs to files so
intermediate artifacts stay inspectable. Every stage is deterministic given
the config seed.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numba
import numpy as np

from . import __version__
from .config import PipelineConfig
from .errors import ConfigError, ModelNotTree, UnknownCluster
from .explain import explain_rows, global_importance, write_force_plot, write_global_importance, write_shap_values
from .geo import read_clusters
from .ingest import (FeatureMatrix, assemble_features, column_means, fill_missing, read_pois,
                     read_raster, read_social)
from .models.cv import ModelSpec, fit_model, k_fold_cv
from .models.ensemble import TreeEnsemble
from .models.selection import random_search, recursive_feature_elimination
from .models.serialize import load_model, save_model
from .synth import SceneConfig, generate_scene
from .targets import TargetTable, derive_cluster_targets, read_households

log = logging.getLogger(__name__)

BENCHMARK_GROUPS = ("SM", "RS", "POI", "All")


def _dump_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def run_synth(cfg: PipelineConfig) -> dict[str, Path]:
    scene_cfg = SceneConfig.from_dict({**cfg.synth, "seed": cfg.seed})
    scene = generate_scene(scene_cfg)
    return scene.write(cfg.out_dir / "scene", cfg.out_dir / "scene" / "testonly")


def run_features(cfg: PipelineConfig) -> Path:
    clusters = read_clusters(cfg.path("clusters", "scene/clusters.csv"))
    rasters = {name: read_raster(p) for name, p in cfg.raster_paths().items()}
    pois_path = cfg.path("pois", "scene/pois.csv")
    social_path = cfg.path("social", "scene/social.csv")
    pois = read_pois(pois_path) if pois_path.exists() else []
    social = read_social(social_path) if social_path.exists() else []
    if not rasters and not pois and not social:
        raise ConfigError("no raster, POI or social inputs found")
    matrix = assemble_features(clusters, rasters, pois, social, cfg.poi_categories)
    out = cfg.out_dir / "features.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    matrix.to_csv(out)
    return out


def run_targets(cfg: PipelineConfig) -> Path:
    households = read_households(cfg.path("households", "scene/households.csv"))
    table = derive_cluster_targets(households)
    out = cfg.out_dir / "targets.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out)
    return out


@dataclass
class TrainingData:
    matrix: FeatureMatrix
    y: np.ndarray


def load_training_data(cfg: PipelineConfig) -> TrainingData:
    matrix = FeatureMatrix.from_csv(cfg.path("features", "features.csv"))
    table = TargetTable.from_csv(cfg.path("targets", "targets.csv"))
    try:
        values = table.target(cfg.target)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    by_id = dict(zip(table.cluster_ids, values))
    missing = [r for r in matrix.row_ids if r not in by_id]
    if missing:
        raise UnknownCluster(f"{len(missing)} feature rows lack targets, e.g. {missing[0]!r}")
    return TrainingData(matrix, np.array([by_id[r] for r in matrix.row_ids]))


def _group_matrix(matrix: FeatureMatrix, group: str) -> FeatureMatrix:
    return matrix if group == "All" else matrix.select_groups([group])


def _tuned_spec(cfg: PipelineConfig, family: str, X, y, names, base: dict[str, Any]) -> ModelSpec:
    spec = ModelSpec(family, base)
    if cfg.search.enabled and family in cfg.search.families and family in cfg.search.spaces:
        best, _ = random_search(X, y, family, cfg.search.spaces[family], cfg.search.n_iter, cfg.k, cfg.seed, base, names)
        spec = ModelSpec(family, {**base, **best})
    return spec


def _select(cfg: PipelineConfig, spec: ModelSpec, m: FeatureMatrix, y, group: str) -> FeatureMatrix:
    if not cfg.rfe.enabled:
        return m
    if cfg.rfe.scope == "combined" and group != "All":
        return m
    n_keep = min(cfg.rfe.n_keep, len(m.columns))
    keep = recursive_feature_elimination(m.values, y, spec, m.columns, n_keep, cfg.rfe.step, cfg.seed)
    return m.select_columns(keep)


def run_benchmark(cfg: PipelineConfig) -> dict[str, Any]:
    """Model x source-group grid of pooled out-of-fold R^2."""
    data = load_training_data(cfg)
    grid: dict[str, dict[str, float]] = {}
    folds: dict[str, dict[str, list[float]]] = {}
    fold_mean: dict[str, dict[str, float]] = {}
    params: dict[str, dict[str, dict[str, Any]]] = {}
    features: dict[str, dict[str, list[str]]] = {}
    for family in cfg.benchmark_families:
        grid[family], folds[family], fold_mean[family], params[family], features[family] = {}, {}, {}, {}, {}
        for group in BENCHMARK_GROUPS:
            m = _group_matrix(data.matrix, group)
            if not m.columns:
                raise ConfigError(f"no {group} features in the feature matrix")
            spec = _tuned_spec(cfg, family, m.values, data.y, m.columns,
                               dict(cfg.benchmark_params.get(family, {})))
            m = _select(cfg, spec, m, data.y, group)
            report = k_fold_cv(m.values, data.y, spec, cfg.k, cfg.seed, m.columns)
            grid[family][group] = report.pooled_r2
            folds[family][group] = list(report.fold_r2)
            fold_mean[family][group] = float(np.nanmean(report.fold_r2))
            params[family][group] = spec.resolved()
            features[family][group] = list(m.columns)
            log.info("%s/%s pooled R2 %.3f", family, group, report.pooled_r2)
    metrics = {
        "grid": grid,
        "folds": folds,
        "fold_mean": fold_mean,
        "params": params,
        "features": features,
        "target": cfg.target,
        "k": cfg.k,
        "seed": cfg.seed,
        "versions": {"wealthmap": __version__, "numpy": np.__version__, "numba": numba.__version__},
    }
    _dump_json(cfg.out_dir / "metrics.json", metrics)
    with open(cfg.out_dir / "benchmark.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", *BENCHMARK_GROUPS])
        for family in cfg.benchmark_families:
            w.writerow([family, *(f"{grid[family][g]:.6f}" for g in BENCHMARK_GROUPS)])
    return metrics


def run_train(cfg: PipelineConfig) -> Path:
    data = load_training_data(cfg)
    m = data.matrix
    spec = _tuned_spec(cfg, cfg.family, m.values, data.y, m.columns, dict(cfg.params))
    if cfg.rfe.enabled:
        n_keep = min(cfg.rfe.n_keep, len(m.columns))
        keep = recursive_feature_elimination(m.values, data.y, spec, m.columns, n_keep, cfg.rfe.step, cfg.seed)
        m = m.select_columns(keep)
    report = k_fold_cv(m.values, data.y, spec, cfg.k, cfg.seed, m.columns)
    means = column_means(m.values, m.columns)
    model = fit_model(spec, fill_missing(m.values, means), data.y, m.columns, cfg.seed)
    out = cfg.out_dir / "model.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(out, model, impute_means=[float(v) for v in means], target=cfg.target,
               family=cfg.family, params=spec.resolved())
    _dump_json(cfg.out_dir / "train_metrics.json", {
        "family": cfg.family,
        "params": spec.resolved(),
        "features": list(m.columns),
        "pooled_r2": report.pooled_r2,
        "fold_r2": list(report.fold_r2),
        "seed": cfg.seed,
    })
    return out


def _model_inputs(cfg: PipelineConfig, rows: list[str] | None):
    model, doc = load_model(cfg.path("model", "model.json"))
    matrix = FeatureMatrix.from_csv(cfg.path("features", "features.csv"))
    if rows is not None:
        matrix = matrix.select_rows(rows)
    names = list(model.feature_names)
    if names:
        missing = [n for n in names if n not in matrix.columns]
        if missing:
            raise ConfigError(f"feature matrix lacks model features {missing}")
        matrix = matrix.select_columns(names)
    means = doc.get("impute_means")
    if means is None:
        means = column_means(matrix.values, matrix.columns)
    X = fill_missing(matrix.values, np.asarray(means, dtype=np.float64))
    return model, matrix, X


def run_predict(cfg: PipelineConfig) -> Path:
    model, matrix, X = _model_inputs(cfg, cfg.explain_rows)
    pred = model.predict(X)
    out = cfg.out_dir / "predictions.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", "prediction"])
        for rid, v in zip(matrix.row_ids, pred):
            w.writerow([rid, repr(float(v))])
    return out


def run_explain(cfg: PipelineConfig, rows: list[str] | None = None) -> dict[str, Path]:
    """Per-row force-plot CSVs, long-form SHAP values and global importance."""
    model, matrix, X = _model_inputs(cfg, rows if rows is not None else cfg.explain_rows)
    if not isinstance(model, TreeEnsemble):
        raise ModelNotTree("SHAP explanations need a tree ensemble; the model is linear")
    explanations = explain_rows(model, X, matrix.row_ids)
    out = cfg.out_dir / "explain"
    (out / "force").mkdir(parents=True, exist_ok=True)
    for e in explanations:
        write_force_plot(out / "force" / f"{e.row_id}.csv", e)
    write_shap_values(out / "shap_values.csv", explanations)
    importance = global_importance(explanations, X, matrix.columns)
    write_global_importance(out / "global_importance.csv", importance)
    return {
        "force_dir": out / "force",
        "shap_values": out / "shap_values.csv",
        "base_value": out / "shap_values.json",
        "global_importance": out / "global_importance.csv",
    }
