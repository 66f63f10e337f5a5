"""Recursive feature elimination and random hyperparameter search."""

from __future__ import annotations

import math
from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import InputError
from ..ingest import column_means, fill_missing
from .cv import ModelSpec, fit_model, k_fold_cv

LOG_UNIFORM_PARAMS = frozenset({"learning_rate", "lam", "lambda"})


def recursive_feature_elimination(X, y, spec: ModelSpec, feature_names: Sequence[str], n_keep: int,
                                  step: int = 1, seed: int = 0) -> list[str]:
    """Refit on the surviving columns and drop the ``step`` least important
    until ``n_keep`` remain. Importance is total split gain for trees and
    |standardised coefficient| for linear models; equal importances drop the
    highest column index first. Missing cells are mean-imputed up front.
    """
    X = np.asarray(X, dtype=np.float64)
    names = list(feature_names)
    p = X.shape[1]
    if len(names) != p:
        raise InputError("one name per feature column required")
    if not 1 <= n_keep <= p:
        raise InputError(f"n_keep must lie in [1, {p}]")
    if step < 1:
        raise InputError("step must be >= 1")
    X = fill_missing(X, column_means(X, names))
    alive = list(range(p))
    while len(alive) > n_keep:
        model = fit_model(spec, X[:, alive], y, [names[j] for j in alive], seed)
        imp = model.feature_importance(len(alive))
        n_drop = min(step, len(alive) - n_keep)
        order = sorted(range(len(alive)), key=lambda i: (imp[i], -alive[i]))
        dropped = {alive[i] for i in order[:n_drop]}
        alive = [j for j in alive if j not in dropped]
    return [names[j] for j in alive]


def _draw(rng: np.random.Generator, name: str, space) -> Any:
    if isinstance(space, tuple):
        lo, hi = space
    elif isinstance(space, Mapping):
        lo, hi = space["low"], space["high"]
    else:
        # an explicit list of choices
        return space[int(rng.integers(0, len(space)))]
    if isinstance(lo, int) and isinstance(hi, int) and not isinstance(lo, bool):
        return int(rng.integers(lo, hi + 1))
    lo, hi = float(lo), float(hi)
    if name in LOG_UNIFORM_PARAMS:
        return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
    return float(rng.uniform(lo, hi))


def draw_params(search_space: Mapping[str, Any], n_iter: int, seed: int) -> list[dict[str, Any]]:
    """Parameter tuples drawn from a seeded stream.

    A tuple ``(low, high)`` or ``{"low", "high"}`` is a range: integers are
    uniform inclusive, floats uniform, log-uniform for learning rates and
    lambdas. A list is a set of choices.
    """
    rng = np.random.default_rng(seed)
    return [{name: _draw(rng, name, search_space[name]) for name in sorted(search_space)}
            for _ in range(n_iter)]


def random_search(X, y, family: str, search_space: Mapping[str, Any], n_iter: int = 10, k: int = 5,
                  seed: int = 0, base_params: Mapping[str, Any] | None = None,
                  feature_names: Sequence[str] = ()) -> tuple[dict[str, Any], float]:
    if n_iter < 1:
        raise InputError("n_iter must be >= 1")
    best, best_r2 = None, -math.inf
    for params in draw_params(search_space, n_iter, seed):
        spec = ModelSpec(family, {**(base_params or {}), **params})
        r2 = k_fold_cv(X, y, spec, k, seed, feature_names).pooled_r2
        if r2 > best_r2 or best is None:
            best, best_r2 = params, r2
    return best, best_r2
