"""CART regression trees with per-node cover counts."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..errors import InputError, MissingCover

LEAF = -1


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flat-array tree. Node 0 is the root; ``feature == -1`` marks a leaf.

    Rows with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        for name, dtype in (("feature", np.int64), ("left", np.int64), ("right", np.int64),
                            ("threshold", np.float64), ("value", np.float64),
                            ("cover", np.float64), ("gain", np.float64)):
            arr = np.ascontiguousarray(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.feature.shape[0]
        if n == 0 or any(getattr(self, a).shape != (n,) for a in
                         ("threshold", "left", "right", "value", "cover", "gain")):
            raise InputError("tree arrays must be nonempty and of equal length")

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        best = 0
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                for child in (self.left[node], self.right[node]):
                    depth[child] = depth[node] + 1
                    best = max(best, int(depth[child]))
        return best

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            nd = node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def check_cover(self) -> None:
        if np.any(~np.isfinite(self.cover)) or np.any(self.cover < 1):
            raise MissingCover("every node needs a positive cover count")
        internal = self.feature != LEAF
        if np.any(self.cover[internal] != self.cover[self.left[internal]] + self.cover[self.right[internal]]):
            raise MissingCover("internal cover must equal the sum of its children")

    def feature_gains(self, n_features: int) -> np.ndarray:
        out = np.zeros(n_features)
        internal = self.feature != LEAF
        np.add.at(out, self.feature[internal], self.gain[internal])
        return out

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {
                    "left": int(self.left[i]),
                    "right": int(self.right[i]),
                    "feature": int(self.feature[i]),
                    "threshold": float(self.threshold[i]),
                    "value": float(self.value[i]),
                    "cover": float(self.cover[i]),
                    "gain": float(self.gain[i]),
                }
                for i in range(self.n_nodes)
            ]
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RegressionTree":
        nodes = doc["nodes"]
        try:
            cover = [nd["cover"] for nd in nodes]
        except KeyError:
            raise MissingCover("serialized tree lacks cover counts") from None
        return cls(
            feature=[nd["feature"] for nd in nodes],
            threshold=[nd["threshold"] for nd in nodes],
            left=[nd["left"] for nd in nodes],
            right=[nd["right"] for nd in nodes],
            value=[nd["value"] for nd in nodes],
            cover=cover,
            gain=[nd.get("gain", 0.0) for nd in nodes],
        )

    def same_as(self, other: "RegressionTree") -> bool:
        return all(np.array_equal(getattr(self, a), getattr(other, a)) for a in
                   ("feature", "threshold", "left", "right", "value", "cover", "gain"))


@numba.njit(cache=True, nogil=True)
def _grow(X, y, max_depth, min_samples_leaf, mtry, keys):
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    cover = np.zeros(cap)
    gain = np.zeros(cap)

    idx = np.arange(n)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    n_draws = 0
    feats = np.arange(p)
    buf = np.empty(n)
    ybuf = np.empty(n)

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        cnt = end - start
        ysum = 0.0
        ymin = np.inf
        ymax = -np.inf
        for k in range(start, end):
            v = y[idx[k]]
            ysum += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        mean = ysum / cnt
        value[node] = mean
        cover[node] = cnt
        if depth >= max_depth or cnt < 2 * min_samples_leaf or ymin == ymax:
            continue

        if mtry < p:
            order = np.argsort(keys[n_draws % keys.shape[0]])
            cand = np.sort(order[:mtry])
            n_draws += 1
        else:
            cand = feats

        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        seg = idx[start:end]
        for f in cand:
            for k in range(cnt):
                buf[k] = X[seg[k], f]
            o = np.argsort(buf[:cnt], kind="mergesort")
            for k in range(cnt):
                ybuf[k] = y[seg[o[k]]] - mean
            total = 0.0
            for k in range(cnt):
                total += ybuf[k]
            sl = 0.0
            for k in range(cnt - 1):
                sl += ybuf[k]
                nl = k + 1
                if nl < min_samples_leaf:
                    continue
                nr = cnt - nl
                if nr < min_samples_leaf:
                    break
                lo = buf[o[k]]
                hi = buf[o[k + 1]]
                if lo == hi:
                    continue
                sr = total - sl
                g = sl * sl / nl + sr * sr / nr - total * total / cnt
                if g > best_gain:
                    thr = (lo + hi) / 2.0
                    if thr >= hi or thr < lo:
                        thr = lo
                    best_gain = g
                    best_feat = f
                    best_thr = thr
        if best_feat < 0:
            continue

        # stable partition of idx[start:end]
        nl = 0
        for k in range(cnt):
            if X[seg[k], best_feat] <= best_thr:
                nl += 1
        tmp = seg.copy()
        a = start
        b = start + nl
        for k in range(cnt):
            if X[tmp[k], best_feat] <= best_thr:
                idx[a] = tmp[k]
                a += 1
            else:
                idx[b] = tmp[k]
                b += 1

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        gain[node] = best_gain
        # right pushed first so the left subtree is expanded first
        st_node[top] = rc
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lc
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], cover[:n_nodes], gain[:n_nodes])


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 8
    min_samples_leaf: int = 5
    mtry: int | None = None  # None -> all features

    def resolved_mtry(self, p: int) -> int:
        m = p if self.mtry is None else int(self.mtry)
        if not 1 <= m <= p:
            raise InputError(f"mtry must lie in [1, {p}], got {m}")
        return m


def fit_regression_tree(X, y, params: TreeParams = TreeParams(), rng: np.random.Generator | None = None
                        ) -> RegressionTree:
    """Greedy variance-reduction CART.

    Candidate features at each node are ``mtry`` draws without replacement
    from ``rng``; thresholds sit at midpoints of adjacent distinct values.
    Equal gains resolve to the lowest feature index, then lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise InputError(f"shape mismatch: X {X.shape}, y {y.shape}")
    n, p = X.shape
    if n < 1 or p < 1:
        raise InputError("empty training data")
    if np.isnan(X).any() or np.isnan(y).any():
        raise InputError("training data contains missing values; impute first")
    if params.max_depth < 1:
        raise InputError("max_depth must be >= 1")
    if params.min_samples_leaf < 1:
        raise InputError("min_samples_leaf must be >= 1")
    mtry = params.resolved_mtry(p)
    if mtry < p:
        if rng is None:
            raise InputError("feature subsampling needs an rng stream")
        keys = rng.random((max(n, 1), p))
    else:
        keys = np.zeros((1, p))
    return RegressionTree(*_grow(X, y, params.max_depth, params.min_samples_leaf, mtry, keys))
