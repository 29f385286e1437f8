"""Command line interface.

Subcommands:
  postprocess  run the separation pipeline on four prediction maps
  synth        generate synthetic scenes + corrupted prediction bundles
  eval         score predictions against ground truth in paired directories
  gridsearch   exhaustive post-processing hyperparameter search

Exit codes: 0 success, 2 missing/inconsistent inputs, 1 internal failure.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, npyio
from .core import DimensionError, threshold
from .harness import (
    GridSpec,
    RunRow,
    grid_search,
    load_grid_scenes,
    write_grid_csv,
    write_report,
)
from .losses import count_error, dice_score
from .postprocess import PostProcessConfig, separate_from_masks
from .synth import NoiseParams, SceneParams, corrupt, generate_scene


class UsageError(Exception):
    """Bad or inconsistent inputs; maps to exit code 2."""


def _int_list(text):
    return tuple(int(v) for v in text.split(","))


def _float_list(text):
    return tuple(float(v) for v in text.split(","))


def _int_pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return (int(parts[0]), int(parts[1]))


def build_parser():
    parser = argparse.ArgumentParser(prog="tissuesep")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("postprocess",
                        help="separate cross-sections from prediction maps")
    pp.add_argument("--tissue", required=True, help="tissue probability map (.npy)")
    pp.add_argument("--pen", required=True, help="pen probability map (.npy)")
    pp.add_argument("--hdist", required=True, help="horizontal distance map (.npy)")
    pp.add_argument("--vdist", required=True, help="vertical distance map (.npy)")
    pp.add_argument("--out-dir", required=True)
    pp.add_argument("--k", type=int, default=20)
    pp.add_argument("--sigma", type=float, default=2.0)
    pp.add_argument("--window", type=int, default=15,
                    help="max-filter window side in bins (odd)")
    pp.add_argument("--percentile", type=float, default=98.0)
    pp.add_argument("--prob-threshold", type=float, default=0.5)
    pp.add_argument("--subtract-pen", action="store_true",
                    help="clear tissue bits wherever the pen mask is set")
    pp.add_argument("--overlay", action="store_true",
                    help="also write a colorized instance overlay PNG")

    sy = sub.add_parser("synth", help="generate synthetic scenes")
    sy.add_argument("--out-dir", required=True)
    sy.add_argument("--n", type=int, required=True, help="number of scenes")
    sy.add_argument("--seed", type=int, required=True)
    sy.add_argument("--height", type=int, default=512)
    sy.add_argument("--width", type=int, default=512)
    sy.add_argument("--sections", type=_int_pair, default=(1, 4),
                    metavar="LO,HI", help="per-scene section count range")
    sy.add_argument("--size-range", type=_int_pair, default=(20, 40), metavar="LO,HI")
    sy.add_argument("--fragmentation-prob", type=float, default=0.0)
    sy.add_argument("--max-fragments", type=int, default=3)
    sy.add_argument("--adjacency-prob", type=float, default=0.0)
    sy.add_argument("--pen-strokes", type=int, default=0)
    sy.add_argument("--min-separation", type=float, default=0.0)
    sy.add_argument("--dist-noise-sigma", type=float, default=0.0)
    sy.add_argument("--mask-flip-prob", type=float, default=0.0)
    sy.add_argument("--boundary-jitter", type=int, default=0)
    sy.add_argument("--prob-blur-sigma", type=float, default=0.0)

    ev = sub.add_parser(
        "eval",
        help="score predictions against ground truth",
        description=(
            "Pairs files by stem: for every <stem>.instances.npy in --gt-dir "
            "there must be a <stem>.instances.npy in --pred-dir. Optional "
            "<stem>.tissue.npy and <stem>.pen.npy masks present on both sides "
            "contribute Dice scores."
        ),
    )
    ev.add_argument("--pred-dir", required=True)
    ev.add_argument("--gt-dir", required=True)
    ev.add_argument("--out", required=True, help="report JSON path")

    gs = sub.add_parser("gridsearch",
                        help="exhaustive post-processing hyperparameter search")
    gs.add_argument("--dataset-dir", required=True,
                    help="directory written by the synth subcommand")
    gs.add_argument("--out-dir", required=True)
    gs.add_argument("--k-values", type=_int_list, default=(20,))
    gs.add_argument("--sigma-values", type=_float_list, default=(2.0,))
    gs.add_argument("--s-values", type=_int_list, default=(15,))
    gs.add_argument("--percentile-values", type=_float_list, default=(98.0,))
    gs.add_argument("--objective", choices=("count_accuracy", "mean_dice"),
                    default="count_accuracy")
    return parser


def _cmd_postprocess(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        tissue_prob = npyio.read_scalar_map(args.tissue)
        pen_prob = npyio.read_scalar_map(args.pen)
        h_dist = npyio.read_scalar_map(args.hdist)
        v_dist = npyio.read_scalar_map(args.vdist)
    except (OSError, npyio.FormatError) as exc:
        raise UsageError(str(exc)) from exc
    shapes = {a.shape for a in (tissue_prob, pen_prob, h_dist, v_dist)}
    if len(shapes) > 1:
        raise UsageError(f"input maps disagree on shape: {sorted(shapes)}")

    cfg = PostProcessConfig(k=args.k, sigma=args.sigma, s=args.window,
                            t_percentile=args.percentile,
                            prob_threshold=args.prob_threshold)
    start = time.perf_counter()
    tissue = threshold(tissue_prob, cfg.prob_threshold)
    pen = threshold(pen_prob, cfg.prob_threshold)
    if args.subtract_pen:
        tissue &= ~pen
    labels, centroids = separate_from_masks(tissue, h_dist, v_dist, cfg)
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    npyio.write_array(out_dir / "tissue.npy", tissue)
    npyio.write_array(out_dir / "pen.npy", pen)
    npyio.write_array(out_dir / "instances.npy", labels)
    npyio.write_labels_png(out_dir / "instances.png", labels)
    with open(out_dir / "centroids.json", "w") as fh:
        json.dump([{"x": float(x), "y": float(y)} for x, y in centroids],
                  fh, indent=2)
        fh.write("\n")
    if args.overlay:
        npyio.write_overlay_png(out_dir / "overlay.png", labels, centroids)
    row = RunRow(name="input", n_instances=int(labels.max()),
                 wall_time_ms=elapsed_ms)
    write_report(out_dir / "report.json", [row])
    return 0


def _cmd_synth(args):
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lo, hi = args.sections
    if not 0 <= lo <= hi:
        raise UsageError(f"bad section range {args.sections}")

    manifest = {
        "seed": args.seed,
        "n_scenes": args.n,
        "params": {
            "height": args.height, "width": args.width,
            "sections": list(args.sections), "size_range": list(args.size_range),
            "fragmentation_prob": args.fragmentation_prob,
            "max_fragments": args.max_fragments,
            "adjacency_prob": args.adjacency_prob,
            "pen_strokes": args.pen_strokes,
            "min_separation": args.min_separation,
            "noise": {
                "dist_noise_sigma": args.dist_noise_sigma,
                "mask_flip_prob": args.mask_flip_prob,
                "boundary_jitter": args.boundary_jitter,
                "prob_blur_sigma": args.prob_blur_sigma,
            },
        },
        "scenes": [],
    }
    for i in range(args.n):
        seq = np.random.SeedSequence([args.seed, i])
        scene_seed, noise_seed = (int(s) for s in seq.generate_state(2))
        meta_rng = np.random.Generator(np.random.PCG64(seq))
        n_sections = int(meta_rng.integers(lo, hi + 1))
        params = SceneParams(
            height=args.height, width=args.width, n_sections=n_sections,
            size_range=args.size_range,
            fragmentation_prob=args.fragmentation_prob,
            max_fragments=args.max_fragments,
            adjacency_prob=args.adjacency_prob,
            n_pen_strokes=args.pen_strokes,
            min_centroid_separation=args.min_separation,
            seed=scene_seed,
        )
        scene = generate_scene(params)
        noise = NoiseParams(
            dist_noise_sigma=args.dist_noise_sigma,
            mask_flip_prob=args.mask_flip_prob,
            boundary_jitter=args.boundary_jitter,
            prob_blur_sigma=args.prob_blur_sigma,
            seed=noise_seed,
        )
        bundle = corrupt(scene, noise)
        name = f"scene_{i:04d}"
        npyio.write_array(out_dir / f"{name}.gt_instances.npy", scene.gt_instances)
        npyio.write_array(out_dir / f"{name}.tissue.npy", scene.tissue)
        npyio.write_array(out_dir / f"{name}.pen.npy", scene.pen)
        npyio.write_array(out_dir / f"{name}.tissue_prob.npy", bundle.tissue_prob)
        npyio.write_array(out_dir / f"{name}.pen_prob.npy", bundle.pen_prob)
        npyio.write_array(out_dir / f"{name}.hdist.npy", bundle.h_dist)
        npyio.write_array(out_dir / f"{name}.vdist.npy", bundle.v_dist)
        manifest["scenes"].append({
            "name": name,
            "gt_count": scene.n_instances,
            "centroids": [{"x": float(x), "y": float(y)}
                          for x, y in scene.centroids],
            "seed": scene_seed,
        })
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_eval(args):
    pred_dir = Path(args.pred_dir)
    gt_dir = Path(args.gt_dir)
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        raise UsageError("--pred-dir and --gt-dir must be existing directories")
    gt_stems = sorted(p.name[:-len(".instances.npy")]
                      for p in gt_dir.glob("*.instances.npy"))
    pred_stems = sorted(p.name[:-len(".instances.npy")]
                        for p in pred_dir.glob("*.instances.npy"))
    orphans = sorted(set(gt_stems) ^ set(pred_stems))
    if orphans:
        raise UsageError("unpaired files: " + ", ".join(orphans))
    if not gt_stems:
        raise UsageError(f"no *.instances.npy files found in {gt_dir}")

    rows = []
    for stem in gt_stems:
        start = time.perf_counter()
        gt_labels = npyio.read_labels(gt_dir / f"{stem}.instances.npy")
        pred_labels = npyio.read_labels(pred_dir / f"{stem}.instances.npy")
        row = RunRow(
            name=stem,
            count_error=count_error(pred_labels, int(gt_labels.max())),
            n_instances=int(pred_labels.max()),
        )
        for mask_name, field in (("tissue", "dice_tissue"), ("pen", "dice_pen")):
            gt_path = gt_dir / f"{stem}.{mask_name}.npy"
            pred_path = pred_dir / f"{stem}.{mask_name}.npy"
            if gt_path.exists() and pred_path.exists():
                setattr(row, field, dice_score(npyio.read_mask(pred_path),
                                               npyio.read_mask(gt_path)))
        row.wall_time_ms = (time.perf_counter() - start) * 1000.0
        rows.append(row)
    write_report(args.out, rows)
    return 0


def _cmd_gridsearch(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        scenes = load_grid_scenes(args.dataset_dir)
    except (OSError, FileNotFoundError, npyio.FormatError) as exc:
        raise UsageError(str(exc)) from exc
    if not scenes:
        raise UsageError(f"dataset {args.dataset_dir} contains no scenes")
    spec = GridSpec(k_values=args.k_values, sigma_values=args.sigma_values,
                    s_values=args.s_values,
                    t_percentile_values=args.percentile_values,
                    objective=args.objective)
    best_cfg, rows = grid_search(spec, scenes)
    write_grid_csv(out_dir / "grid_results.csv", rows)
    with open(out_dir / "best_config.json", "w") as fh:
        json.dump({
            "k": best_cfg.k, "sigma": best_cfg.sigma, "s": best_cfg.s,
            "t_percentile": best_cfg.t_percentile,
            "objective": spec.objective,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


_COMMANDS = {
    "postprocess": _cmd_postprocess,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "gridsearch": _cmd_gridsearch,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
