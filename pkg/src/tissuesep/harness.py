"""Evaluation reports and the post-processing hyperparameter grid search."""

import csv
import json
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .losses import count_error, dice_score
from .postprocess import PostProcessConfig, separate_from_masks


@dataclass
class RunRow:
    name: str
    dice_tissue: float = None
    dice_pen: float = None
    count_error: int = None
    n_instances: int = None
    wall_time_ms: float = None


_AGG_FIELDS = ("dice_tissue", "dice_pen", "count_error", "n_instances",
               "wall_time_ms")


def aggregate_rows(rows):
    """Mean and (population) standard deviation per numeric field, skipping
    fields that are absent in a row."""
    agg = {}
    for field in _AGG_FIELDS:
        values = [getattr(r, field) for r in rows if getattr(r, field) is not None]
        if values:
            arr = np.array(values, dtype=np.float64)
            agg[field] = {"mean": float(arr.mean()), "std": float(arr.std())}
    return agg


def report_dict(rows):
    return {"per_image": [asdict(r) for r in rows], "aggregate": aggregate_rows(rows)}


def write_report(path, rows):
    with open(path, "w") as fh:
        json.dump(report_dict(rows), fh, indent=2, sort_keys=True)
        fh.write("\n")


def matched_instance_dice(pred_labels, gt_labels):
    """Mean per-instance Dice after greedily matching predicted to ground
    truth instances by overlap; unmatched ground-truth instances score 0."""
    pred_labels = np.asarray(pred_labels)
    gt_labels = np.asarray(gt_labels)
    n_gt = int(gt_labels.max())
    n_pred = int(pred_labels.max())
    if n_gt == 0:
        return 1.0 if n_pred == 0 else 0.0
    if n_pred == 0:
        return 0.0
    pair = gt_labels.astype(np.int64) * (n_pred + 1) + pred_labels
    overlap = np.bincount(pair.ravel(), minlength=(n_gt + 1) * (n_pred + 1))
    overlap = overlap.reshape(n_gt + 1, n_pred + 1)[1:, 1:]
    gt_sizes = np.bincount(gt_labels.ravel(), minlength=n_gt + 1)[1:]
    pred_sizes = np.bincount(pred_labels.ravel(), minlength=n_pred + 1)[1:]

    dice = np.where(
        gt_sizes[:, None] + pred_sizes[None, :] > 0,
        2.0 * overlap / (gt_sizes[:, None] + pred_sizes[None, :]),
        0.0,
    )
    scores = []
    used_pred = set()
    # greedy: repeatedly take the globally best remaining (gt, pred) pair
    order = np.argsort(-dice, axis=None, kind="stable")
    matched_gt = set()
    for flat in order:
        gi, pi = divmod(int(flat), n_pred)
        if gi in matched_gt or pi in used_pred:
            continue
        if dice[gi, pi] <= 0:
            break
        matched_gt.add(gi)
        used_pred.add(pi)
        scores.append(dice[gi, pi])
        if len(matched_gt) == n_gt or len(used_pred) == n_pred:
            break
    scores += [0.0] * (n_gt - len(scores))
    return float(np.mean(scores))


@dataclass(frozen=True)
class GridSpec:
    k_values: tuple
    sigma_values: tuple
    s_values: tuple
    t_percentile_values: tuple
    objective: str = "count_accuracy"

    def __post_init__(self):
        for name in ("k_values", "sigma_values", "s_values", "t_percentile_values"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        if any(s % 2 == 0 for s in self.s_values):
            raise ValueError("all s values must be odd")
        if self.objective not in ("count_accuracy", "mean_dice"):
            raise ValueError(f"unknown objective {self.objective!r}")


def _evaluate_config(cfg, scenes):
    """Score one config over loaded scenes.

    Each scene is a dict with tissue (bool mask from the corrupted bundle),
    h_dist, v_dist, gt_instances, gt_count.
    """
    count_hits = []
    dice_values = []
    for scene in scenes:
        labels, _ = separate_from_masks(scene["tissue"], scene["h_dist"],
                                        scene["v_dist"], cfg)
        count_hits.append(count_error(labels, scene["gt_count"]) == 0)
        dice_values.append(matched_instance_dice(labels, scene["gt_instances"]))
    return float(np.mean(count_hits)), float(np.mean(dice_values))


def grid_search(spec: GridSpec, scenes):
    """Exhaustive search over the Cartesian product of candidate values.

    Returns (best_config, rows) where rows holds one result dict per grid
    cell. Ties on the objective are broken by smaller sigma, then smaller
    s, then larger percentile, then smaller k.
    """
    if not scenes:
        raise ValueError("grid search needs at least one labelled scene")
    rows = []
    for k, sigma, s, pct in product(spec.k_values, spec.sigma_values,
                                    spec.s_values, spec.t_percentile_values):
        cfg = PostProcessConfig(k=k, sigma=sigma, s=s, t_percentile=pct)
        count_acc, mean_dice = _evaluate_config(cfg, scenes)
        rows.append({
            "k": k, "sigma": sigma, "s": s, "t_percentile": pct,
            "count_accuracy": count_acc, "mean_dice": mean_dice,
        })
    best = max(
        rows,
        key=lambda r: (r[spec.objective], -r["sigma"], -r["s"],
                       r["t_percentile"], -r["k"]),
    )
    best_cfg = PostProcessConfig(k=best["k"], sigma=best["sigma"], s=best["s"],
                                 t_percentile=best["t_percentile"])
    return best_cfg, rows


def write_grid_csv(path, rows):
    fields = ["k", "sigma", "s", "t_percentile", "count_accuracy", "mean_dice"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def load_grid_scenes(dataset_dir, prob_threshold=0.5):
    """Load scenes written by the synth CLI for grid search / evaluation."""
    from . import npyio

    dataset_dir = Path(dataset_dir)
    manifest_path = dataset_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {dataset_dir}")
    manifest = json.loads(manifest_path.read_text())
    scenes = []
    for entry in manifest["scenes"]:
        name = entry["name"]
        tissue_prob = npyio.read_scalar_map(dataset_dir / f"{name}.tissue_prob.npy")
        scenes.append({
            "name": name,
            "tissue": tissue_prob >= prob_threshold,
            "h_dist": npyio.read_scalar_map(dataset_dir / f"{name}.hdist.npy"),
            "v_dist": npyio.read_scalar_map(dataset_dir / f"{name}.vdist.npy"),
            "gt_instances": npyio.read_labels(dataset_dir / f"{name}.gt_instances.npy"),
            "gt_count": entry["gt_count"],
        })
    return scenes
