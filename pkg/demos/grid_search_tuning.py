"""Tuning post-processing hyperparameters with the grid search harness.

Builds a small noisy dataset in memory, searches over histogram bin
size, smoothing sigma, peak window, and threshold percentile, and prints
the leaderboard plus the winning configuration.
"""

import numpy as np

from tissuesep import NoiseParams, SceneParams, corrupt, generate_scene, threshold
from tissuesep.harness import GridSpec, grid_search

N_SCENES = 20


def make_dataset():
    scenes = []
    for i in range(N_SCENES):
        seed = int(np.random.SeedSequence([77, i]).generate_state(1)[0])
        params = SceneParams(
            height=320, width=320,
            n_sections=1 + i % 3,
            size_range=(20, 30),
            fragmentation_prob=0.4,
            adjacency_prob=0.3,
            min_centroid_separation=70.0,
            seed=seed,
        )
        scene = generate_scene(params)
        noise = NoiseParams(dist_noise_sigma=2.0, boundary_jitter=1,
                            seed=500 + i)
        bundle = corrupt(scene, noise)
        scenes.append({
            "tissue": threshold(bundle.tissue_prob, 0.5),
            "h_dist": bundle.h_dist,
            "v_dist": bundle.v_dist,
            "gt_instances": scene.gt_instances,
            "gt_count": scene.n_instances,
        })
    return scenes


def main():
    dataset = make_dataset()
    spec = GridSpec(
        k_values=(6, 8, 12),
        sigma_values=(1.0, 2.0),
        s_values=(7, 9),
        t_percentile_values=(95.0, 98.0),
        objective="count_accuracy",
    )
    best, rows = grid_search(spec, dataset)

    print(f"{'k':>3} {'sigma':>6} {'s':>3} {'pctl':>5} "
          f"{'count acc':>10} {'mean dice':>10}")
    for row in sorted(rows, key=lambda r: -r["count_accuracy"])[:10]:
        print(f"{row['k']:3d} {row['sigma']:6.1f} {row['s']:3d} "
              f"{row['t_percentile']:5.1f} {row['count_accuracy']:10.3f} "
              f"{row['mean_dice']:10.4f}")
    print(f"\nbest: k={best.k} sigma={best.sigma} s={best.s} "
          f"percentile={best.t_percentile}")


if __name__ == "__main__":
    main()
