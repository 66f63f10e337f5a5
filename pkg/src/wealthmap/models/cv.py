"""Model specs, R^2 and leakage-free k-fold cross-validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..errors import InputError, TooFewRows, ZeroVarianceTarget
from ..ingest import column_means, fill_missing
from .ensemble import ForestParams, GbdtParams, fit_gbdt, fit_random_forest
from .linear import KINDS as LINEAR_KINDS, fit_linear_family

FAMILIES = ("ols", "lasso", "ridge", "gbdt", "random_forest")
TREE_FAMILIES = ("gbdt", "random_forest")

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "ols": {},
    "ridge": {"lam": 1.0},
    "lasso": {"lam": 0.01},
    "random_forest": {"n_trees": 200, "max_depth": 8, "min_samples_leaf": 5},
    "gbdt": {"n_stages": 200, "learning_rate": 0.1, "max_depth": 4, "min_samples_leaf": 5},
}


@dataclass(frozen=True)
class ModelSpec:
    family: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown model family {self.family!r}; choose from {FAMILIES}")

    def resolved(self) -> dict[str, Any]:
        return {**DEFAULT_PARAMS[self.family], **self.params}

    def with_params(self, **updates) -> "ModelSpec":
        return ModelSpec(self.family, {**self.params, **updates})


def fit_model(spec: ModelSpec, X, y, feature_names: Sequence[str] = (), seed: int = 0):
    """Fit any family on complete (already imputed) data."""
    params = spec.resolved()
    if spec.family in LINEAR_KINDS:
        return fit_linear_family(X, y, spec.family, float(params.get("lam", 0.0)), feature_names)
    params.setdefault("seed", seed)
    if spec.family == "random_forest":
        return fit_random_forest(X, y, ForestParams(**params), feature_names)
    return fit_gbdt(X, y, GbdtParams(**params), feature_names)


def r_squared(y, yhat) -> float:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1 or y.size < 2:
        raise InputError("r_squared needs two equal-length vectors of length >= 2")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVarianceTarget("target has zero variance")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def fold_assignment(n: int, k: int, seed: int) -> np.ndarray:
    """Fold label per row: seeded shuffle, then contiguous near-equal chunks."""
    if k < 2:
        raise InputError("k must be >= 2")
    if n < k:
        raise TooFewRows(f"{n} rows cannot fill {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    for f, chunk in enumerate(np.array_split(perm, k)):
        folds[chunk] = f
    return folds


@dataclass
class CvReport:
    fold_r2: list[float]
    pooled_r2: float
    oof_predictions: np.ndarray
    folds: np.ndarray
    fold_means: list[np.ndarray]

    @property
    def mean_fold_r2(self) -> float:
        return float(np.mean(self.fold_r2))


def k_fold_cv(X, y, spec: ModelSpec, k: int = 5, seed: int = 0, feature_names: Sequence[str] = ()
              ) -> CvReport:
    """Out-of-fold evaluation. Missing cells (NaN) are imputed per fold
    from training rows only."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if X.shape[0] != n:
        raise InputError("X and y row counts differ")
    folds = fold_assignment(n, k, seed)
    oof = np.empty(n)
    fold_r2, means_log = [], []
    for f in range(k):
        test = folds == f
        train = ~test
        means = column_means(X[train], feature_names or None)
        means_log.append(means)
        model = fit_model(spec, fill_missing(X[train], means), y[train], feature_names, seed)
        oof[test] = model.predict(fill_missing(X[test], means))
        try:
            fold_r2.append(r_squared(y[test], oof[test]))
        except (InputError, ZeroVarianceTarget):
            fold_r2.append(float("nan"))
    return CvReport(fold_r2, r_squared(y, oof), oof, folds, means_log)
