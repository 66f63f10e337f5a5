"""Compare TreeSHAP against brute-force Shapley enumeration on random forests.

    python3 scripts/shap_oracle_sweep.py --models 50 --probes 20 --seed 0
"""

import argparse
import time

import numpy as np

from wealthmap.explain import brute_force_shapley, tree_shap
from wealthmap.models import ForestParams, GbdtParams, fit_gbdt, fit_random_forest


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", type=int, default=50)
    ap.add_argument("--probes", type=int, default=20)
    ap.add_argument("--max-features", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    start = time.perf_counter()
    worst = 0.0
    for m in range(args.models):
        p = int(rng.integers(2, args.max_features + 1))
        X = rng.normal(size=(200, p))
        y = X[:, 0] * X[:, -1] + np.sin(X[:, p // 2]) + 0.3 * rng.normal(size=200)
        if m % 2:
            model = fit_gbdt(X, y, GbdtParams(n_stages=int(rng.integers(1, 21)), max_depth=int(rng.integers(1, 5)),
                                              min_samples_leaf=2, seed=m))
        else:
            model = fit_random_forest(X, y, ForestParams(n_trees=int(rng.integers(1, 21)),
                                                         max_depth=int(rng.integers(1, 5)),
                                                         min_samples_leaf=2, mtry=max(1, p // 2), seed=m))
        gap = 0.0
        for x in rng.normal(size=(args.probes, p)):
            diff = tree_shap(model, x).contributions - brute_force_shapley(model, x).contributions
            gap = max(gap, float(np.abs(diff).max()))
        worst = max(worst, gap)
        print(f"model {m:3d}  p={p:2d}  trees={len(model.trees):2d}  max diff {gap:.2e}")
    print(f"worst {worst:.3e} over {args.models} models in {time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
