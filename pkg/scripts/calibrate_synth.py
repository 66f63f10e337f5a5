"""Random-forest pooled R^2 per source group across synthetic-scene seeds.

Used to check that the default generator keeps All >= 0.6 and All above
every single source.

    python3 scripts/calibrate_synth.py --seeds 42 1 2 --noise-sd 1.6
"""

import argparse
import time

from wealthmap.ingest import assemble_features
from wealthmap.models import ModelSpec, k_fold_cv
from wealthmap.pipeline import BENCHMARK_GROUPS
from wealthmap.synth import SceneConfig, generate_scene
from wealthmap.targets import derive_cluster_targets


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[42])
    ap.add_argument("--noise-sd", type=float, default=SceneConfig.noise_sd)
    ap.add_argument("--household-sd", type=float, default=SceneConfig.household_sd)
    ap.add_argument("--clusters", type=int, default=SceneConfig.n_clusters)
    args = ap.parse_args()

    print("seed " + "".join(f"{g:>8}" for g in BENCHMARK_GROUPS) + "     time")
    for seed in args.seeds:
        start = time.perf_counter()
        scene = generate_scene(SceneConfig(n_clusters=args.clusters, noise_sd=args.noise_sd,
                                           household_sd=args.household_sd, seed=seed))
        matrix = assemble_features(scene.clusters, scene.rasters, scene.pois, scene.social)
        y = derive_cluster_targets(scene.households, matrix.row_ids).wealth_index
        row = []
        for group in BENCHMARK_GROUPS:
            m = matrix if group == "All" else matrix.select_groups([group])
            row.append(k_fold_cv(m.values, y, ModelSpec("random_forest"), 5, seed, m.columns).pooled_r2)
        print(f"{seed:4d} " + "".join(f"{v:8.3f}" for v in row) + f"  {time.perf_counter() - start:6.1f}s")


if __name__ == "__main__":
    main()
