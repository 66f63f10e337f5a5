"""Exact Shapley attributions for tree ensembles (path-dependent value function)."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .errors import InputError, TooManyFeatures
from .models.ensemble import TreeEnsemble
from .models.tree import LEAF, RegressionTree

MAX_BRUTE_FORCE_FEATURES = 15


@dataclass(frozen=True)
class ShapExplanation:
    base_value: float
    contributions: np.ndarray
    prediction: float
    feature_names: tuple[str, ...] = ()
    feature_values: np.ndarray | None = None
    row_id: str | None = None

    def local_accuracy_gap(self) -> float:
        return abs(self.base_value + math.fsum(self.contributions) - self.prediction)


# ---------------------------------------------------------------- oracle


def tree_conditional_expectation(tree: RegressionTree, x, S) -> float:
    """E[f(x) | x_S] under the tree's cover distribution.

    Splits on features in S follow x; the others average both children
    weighted by cover.
    """
    S = frozenset(S)

    def walk(node: int) -> float:
        f = tree.feature[node]
        if f == LEAF:
            return float(tree.value[node])
        l, r = tree.left[node], tree.right[node]
        if f in S:
            return walk(l if x[f] <= tree.threshold[node] else r)
        return (tree.cover[l] * walk(l) + tree.cover[r] * walk(r)) / tree.cover[node]

    return walk(0)


def ensemble_value(ensemble: TreeEnsemble, x, S) -> float:
    total = math.fsum(tree_conditional_expectation(t, x, S) for t in ensemble.trees)
    return ensemble.offset + ensemble.tree_weight * total


def brute_force_shapley(ensemble: TreeEnsemble, x, n_features: int | None = None) -> ShapExplanation:
    """Shapley values by enumerating every coalition; exponential in p."""
    x = np.asarray(x, dtype=np.float64)
    p = len(x) if n_features is None else n_features
    if p > MAX_BRUTE_FORCE_FEATURES:
        raise TooManyFeatures(f"brute force limited to {MAX_BRUTE_FORCE_FEATURES} features, got {p}")
    cache: dict[frozenset, float] = {}

    def v(S: frozenset) -> float:
        if S not in cache:
            cache[S] = ensemble_value(ensemble, x, S)
        return cache[S]

    weights = [math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p) for s in range(p)]
    phi = np.zeros(p)
    for i in range(p):
        others = [j for j in range(p) if j != i]
        terms = []
        for size in range(p):
            for combo in itertools.combinations(others, size):
                S = frozenset(combo)
                terms.append(weights[size] * (v(S | {i}) - v(S)))
        phi[i] = math.fsum(terms)
    full = frozenset(range(p))
    return ShapExplanation(v(frozenset()), phi, v(full), ensemble.feature_names or (), x)


# ---------------------------------------------------------------- TreeSHAP


@numba.njit(cache=True, nogil=True)
def _extend(pd, pz, po, pw, s, length, zero_frac, one_frac, feat):
    pd[s + length] = feat
    pz[s + length] = zero_frac
    po[s + length] = one_frac
    pw[s + length] = 1.0 if length == 0 else 0.0
    for i in range(length - 1, -1, -1):
        pw[s + i + 1] += one_frac * pw[s + i] * (i + 1) / (length + 1)
        pw[s + i] = zero_frac * pw[s + i] * (length - i) / (length + 1)


@numba.njit(cache=True, nogil=True)
def _unwind(pd, pz, po, pw, s, length, i):
    one_frac = po[s + i]
    zero_frac = pz[s + i]
    n = pw[s + length - 1]
    for j in range(length - 2, -1, -1):
        if one_frac != 0.0:
            t = pw[s + j]
            pw[s + j] = n * length / ((j + 1) * one_frac)
            n = t - pw[s + j] * zero_frac * (length - 1 - j) / length
        else:
            pw[s + j] = pw[s + j] * length / (zero_frac * (length - 1 - j))
    for j in range(i, length - 1):
        pd[s + j] = pd[s + j + 1]
        pz[s + j] = pz[s + j + 1]
        po[s + j] = po[s + j + 1]


@numba.njit(cache=True, nogil=True)
def _unwound_sum(pz, po, pw, s, length, i):
    one_frac = po[s + i]
    zero_frac = pz[s + i]
    nxt = pw[s + length - 1]
    total = 0.0
    for j in range(length - 2, -1, -1):
        if one_frac != 0.0:
            tmp = nxt * length / ((j + 1) * one_frac)
            total += tmp
            nxt = pw[s + j] - tmp * zero_frac * (length - 1 - j) / length
        else:
            total += pw[s + j] * length / (zero_frac * (length - 1 - j))
    return total


# recursive kernels must not use cache=True: numba reloads them with a stale
# self-reference and segfaults
@numba.njit(nogil=True)
def _recurse(feature, threshold, left, right, value, cover, x, phi,
             pd, pz, po, pw, node, ps, plen, zero_frac, one_frac, feat):
    # copy the parent's path into a fresh slot so siblings share no state
    s = ps + plen
    for k in range(plen):
        pd[s + k] = pd[ps + k]
        pz[s + k] = pz[ps + k]
        po[s + k] = po[ps + k]
        pw[s + k] = pw[ps + k]
    _extend(pd, pz, po, pw, s, plen, zero_frac, one_frac, feat)
    length = plen + 1

    f = feature[node]
    if f < 0:
        for i in range(1, length):
            w = _unwound_sum(pz, po, pw, s, length, i)
            phi[pd[s + i]] += w * (po[s + i] - pz[s + i]) * value[node]
        return

    if x[f] <= threshold[node]:
        hot = left[node]
        cold = right[node]
    else:
        hot = right[node]
        cold = left[node]
    inc_zero = 1.0
    inc_one = 1.0
    for k in range(1, length):
        if pd[s + k] == f:
            inc_zero = pz[s + k]
            inc_one = po[s + k]
            _unwind(pd, pz, po, pw, s, length, k)
            length -= 1
            break
    _recurse(feature, threshold, left, right, value, cover, x, phi, pd, pz, po, pw,
             hot, s, length, inc_zero * cover[hot] / cover[node], inc_one, f)
    _recurse(feature, threshold, left, right, value, cover, x, phi, pd, pz, po, pw,
             cold, s, length, inc_zero * cover[cold] / cover[node], 0.0, f)


@numba.njit(nogil=True)
def _tree_shap_rows(feature, threshold, left, right, value, cover, X, max_depth, out):
    size = (max_depth + 3) * (max_depth + 4) // 2 + 4
    pd = np.zeros(size, dtype=np.int64)
    pz = np.zeros(size)
    po = np.zeros(size)
    pw = np.zeros(size)
    for r in range(X.shape[0]):
        _recurse(feature, threshold, left, right, value, cover, X[r], out[r],
                 pd, pz, po, pw, 0, 0, 0, 1.0, 1.0, -1)


def tree_expected_value(tree: RegressionTree) -> float:
    leaves = tree.feature == LEAF
    return float(np.sum(tree.value[leaves] * tree.cover[leaves]) / tree.cover[0])


def tree_shap_single(tree: RegressionTree, X) -> np.ndarray:
    """Per-row attributions for one tree; shape (n_rows, n_features)."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    tree.check_cover()
    out = np.zeros(X.shape, dtype=np.float64)
    if tree.n_nodes > 1 and X.shape[1] <= int(tree.feature.max()):
        raise InputError("row has fewer features than the tree uses")
    _tree_shap_rows(tree.feature, tree.threshold, tree.left, tree.right, tree.value, tree.cover,
                    X, tree.depth(), out)
    return out


def tree_shap_matrix(ensemble: TreeEnsemble, X) -> tuple[float, np.ndarray, np.ndarray]:
    """(base_value, phi[n_rows, p], predictions) for many rows at once."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    phi = np.zeros(X.shape)
    for t in ensemble.trees:
        phi += tree_shap_single(t, X)
    phi *= ensemble.tree_weight
    base = ensemble.offset + ensemble.tree_weight * math.fsum(
        tree_expected_value(t) for t in ensemble.trees
    )
    return base, phi, ensemble.predict(X)


def tree_shap(ensemble: TreeEnsemble, x) -> ShapExplanation:
    """Polynomial-time equivalent of :func:`brute_force_shapley`."""
    x = np.asarray(x, dtype=np.float64)
    base, phi, pred = tree_shap_matrix(ensemble, x[None, :])
    return ShapExplanation(base, phi[0], float(pred[0]), ensemble.feature_names or (), x)


def explain_rows(ensemble: TreeEnsemble, X, row_ids: Sequence[str] | None = None) -> list[ShapExplanation]:
    X = np.asarray(X, dtype=np.float64)
    base, phi, pred = tree_shap_matrix(ensemble, X)
    ids = list(row_ids) if row_ids is not None else [str(i) for i in range(X.shape[0])]
    return [ShapExplanation(base, phi[i], float(pred[i]), ensemble.feature_names or (), X[i], ids[i])
            for i in range(X.shape[0])]


# ---------------------------------------------------------------- summaries


@dataclass(frozen=True)
class GlobalImportance:
    features: list[str]
    mean_abs_shap: np.ndarray
    scatter: dict[str, list[tuple[float, float]]]

    def rows(self) -> list[tuple[int, str, float]]:
        return [(rank + 1, f, float(v)) for rank, (f, v) in enumerate(zip(self.features, self.mean_abs_shap))]


def global_importance(explanations: Sequence[ShapExplanation], feature_values=None,
                      feature_names: Sequence[str] | None = None) -> GlobalImportance:
    """Mean |phi| per feature, sorted descending (ties by column order).

    ``feature_values`` should hold the original, unstandardised values.
    """
    if not explanations:
        raise InputError("no explanations to summarise")
    p = len(explanations[0].contributions)
    if any(len(e.contributions) != p for e in explanations):
        raise InputError("explanations carry different feature counts")
    names = list(feature_names or explanations[0].feature_names or [f"f{j}" for j in range(p)])
    phi = np.array([e.contributions for e in explanations])
    if feature_values is None:
        feature_values = np.array([e.feature_values for e in explanations])
    vals = np.asarray(feature_values, dtype=np.float64)
    mean_abs = np.abs(phi).mean(axis=0)
    order = sorted(range(p), key=lambda j: (-mean_abs[j], j))
    scatter = {names[j]: [(float(vals[i, j]), float(phi[i, j])) for i in range(len(explanations))]
               for j in order}
    return GlobalImportance([names[j] for j in order], mean_abs[order], scatter)


@dataclass(frozen=True)
class ForceArrow:
    feature: str
    feature_value: float
    contribution: float

    @property
    def direction(self) -> str:
        return "increase" if self.contribution > 0 else "decrease"


def force_plot_data(explanation: ShapExplanation) -> tuple[float, float, list[ForceArrow]]:
    """(base_value, prediction, arrows sorted by |contribution|); zero
    contributions draw no arrow."""
    phi = explanation.contributions
    names = explanation.feature_names or tuple(f"f{j}" for j in range(len(phi)))
    vals = explanation.feature_values if explanation.feature_values is not None else np.full(len(phi), np.nan)
    order = sorted((j for j in range(len(phi)) if phi[j] != 0.0), key=lambda j: (-abs(phi[j]), j))
    arrows = [ForceArrow(names[j], float(vals[j]), float(phi[j])) for j in order]
    return explanation.base_value, explanation.prediction, arrows


def write_force_plot(path: str | Path, explanation: ShapExplanation) -> None:
    base, pred, arrows = force_plot_data(explanation)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "feature_value", "contribution", "direction"])
        w.writerow(["base_value", "", repr(float(base)), ""])
        for a in arrows:
            w.writerow([a.feature, repr(a.feature_value), repr(a.contribution), a.direction])
        w.writerow(["prediction", "", repr(float(pred)), ""])


def write_shap_values(path: str | Path, explanations: Sequence[ShapExplanation]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", "feature", "feature_value", "shap_value"])
        for e in explanations:
            names = e.feature_names or tuple(f"f{j}" for j in range(len(e.contributions)))
            for j, name in enumerate(names):
                w.writerow([e.row_id, name, repr(float(e.feature_values[j])), repr(float(e.contributions[j]))])
    sidecar = Path(path).with_suffix(".json")
    base = explanations[0].base_value if explanations else None
    sidecar.write_text(json.dumps({"base_value": base}, sort_keys=True))


def write_global_importance(path: str | Path, importance: GlobalImportance) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature", "mean_abs_shap"])
        for rank, f, v in importance.rows():
            w.writerow([rank, f, repr(v)])

