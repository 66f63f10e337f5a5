"""Random forests and squared-loss gradient boosting over CART trees."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import InputError
from .tree import RegressionTree, TreeParams, fit_regression_tree

MEAN = "mean"
SUM = "sum"


@dataclass(frozen=True, eq=False)
class TreeEnsemble:
    """Trees plus a combiner.

    mean (forest): prediction = mean of tree outputs.
    sum (boosting): prediction = base_score + learning_rate * sum of tree outputs.
    """

    trees: tuple[RegressionTree, ...]
    combiner: str = MEAN
    base_score: float = 0.0
    learning_rate: float = 1.0
    feature_names: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if not self.trees:
            raise InputError("ensemble needs at least one tree")
        if self.combiner not in (MEAN, SUM):
            raise InputError(f"unknown combiner {self.combiner!r}")

    @property
    def tree_weight(self) -> float:
        return 1.0 / len(self.trees) if self.combiner == MEAN else self.learning_rate

    @property
    def offset(self) -> float:
        return 0.0 if self.combiner == MEAN else self.base_score

    def tree_predictions(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.array([t.predict(X) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        # summing sorted tree outputs makes the result independent of tree order
        per_tree = np.sort(self.tree_predictions(X), axis=0)
        if self.combiner == MEAN:
            return per_tree.sum(axis=0) / len(self.trees)
        return self.base_score + self.learning_rate * per_tree.sum(axis=0)

    def feature_importance(self, n_features: int) -> np.ndarray:
        """Total split gain per feature, summed over trees."""
        return np.sum([t.feature_gains(n_features) for t in self.trees], axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": "tree_ensemble",
            "combiner": self.combiner,
            "base_score": float(self.base_score),
            "learning_rate": float(self.learning_rate),
            "feature_names": list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeEnsemble":
        return cls(
            trees=tuple(RegressionTree.from_dict(t) for t in doc["trees"]),
            combiner=doc["combiner"],
            base_score=float(doc.get("base_score", 0.0)),
            learning_rate=float(doc.get("learning_rate", 1.0)),
            feature_names=tuple(doc.get("feature_names", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TreeEnsemble":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "TreeEnsemble":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    mtry: int | None = None  # None -> floor(p/3), at least 1
    max_depth: int = 8
    min_samples_leaf: int = 5
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for tree ``index``; never shared between trees."""
    return np.random.default_rng([int(seed), int(index)])


def _forest_tree(X, y, tp: TreeParams, bootstrap: bool, seed: int, t: int) -> RegressionTree:
    rng = tree_rng(seed, t)
    if bootstrap:
        rows = rng.integers(0, X.shape[0], X.shape[0])
        return fit_regression_tree(X[rows], y[rows], tp, rng)
    return fit_regression_tree(X, y, tp, rng)


def fit_random_forest(X, y, params: ForestParams = ForestParams(), feature_names: Sequence[str] = ()
                      ) -> TreeEnsemble:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if params.n_trees < 1:
        raise InputError("n_trees must be >= 1")
    p = X.shape[1]
    mtry = params.mtry if params.mtry is not None else max(p // 3, 1)
    tp = TreeParams(params.max_depth, params.min_samples_leaf, min(mtry, p))

    def build(t):
        return _forest_tree(X, y, tp, params.bootstrap, params.seed, t)

    if params.n_jobs > 1:
        with ThreadPoolExecutor(params.n_jobs) as pool:
            trees = list(pool.map(build, range(params.n_trees)))
    else:
        trees = [build(t) for t in range(params.n_trees)]
    return TreeEnsemble(tuple(trees), MEAN, 0.0, 1.0, tuple(feature_names))


@dataclass(frozen=True)
class GbdtParams:
    n_stages: int = 200
    learning_rate: float = 0.1
    max_depth: int = 4
    min_samples_leaf: int = 5
    seed: int = 0


def fit_gbdt(X, y, params: GbdtParams = GbdtParams(), feature_names: Sequence[str] = (),
             return_staged_mse: bool = False):
    """Squared-loss boosting: each stage fits a tree to the current residuals."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if params.n_stages < 1:
        raise InputError("n_stages must be >= 1")
    if not 0.0 < params.learning_rate <= 1.0:
        raise InputError("learning_rate must lie in (0, 1]")
    tp = TreeParams(params.max_depth, params.min_samples_leaf, None)
    base = float(y.mean())
    current = np.full(y.shape, base)
    trees = []
    staged = [float(np.mean((y - current) ** 2))]
    for k in range(params.n_stages):
        tree = fit_regression_tree(X, y - current, tp, tree_rng(params.seed, k))
        trees.append(tree)
        current = current + params.learning_rate * tree.predict(X)
        staged.append(float(np.mean((y - current) ** 2)))
    model = TreeEnsemble(tuple(trees), SUM, base, params.learning_rate, tuple(feature_names))
    if return_staged_mse:
        return model, staged
    return model
