/**
 * Node bindings for the tissue cross-section separation toolkit.
 *
 * A thin wrapper: inputs are serialized to NPY files, the `tissuesep`
 * command line tool does the work in a private temp directory, and the
 * artifacts it writes are decoded back into typed arrays. Results are
 * therefore byte-identical to running the CLI by hand. Set the
 * TISSUESEP_CLI environment variable to point at a non-default
 * executable.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { ArrayView2D, checkView, sameShape, view2d } from "./arrays.js";
import { CoreProcessError, runCore, withTempDir } from "./cli.js";
import { NpyFormatError, decodeNpy, encodeNpy } from "./npy.js";

export { ArrayView2D, ElementKind, view2d } from "./arrays.js";
export { NpyFormatError, decodeNpy, encodeNpy } from "./npy.js";
export { CoreProcessError } from "./cli.js";

export interface Point {
  x: number;
  y: number;
}

export interface SeparateConfig {
  /** Histogram bin side length in pixels. */
  k?: number;
  /** Gaussian smoothing sigma in bins. */
  sigma?: number;
  /** Peak-detection max-filter window side in bins (odd). */
  window?: number;
  /** Peak threshold percentile over smoothed bin values. */
  percentile?: number;
  /** Probability cutoff for binarizing the tissue and pen maps. */
  probThreshold?: number;
  /** Clear tissue pixels wherever the pen mask is set. */
  subtractPen?: boolean;
}

export interface SeparateResult {
  /** Instance label map; 0 is background, labels are contiguous from 1. */
  labels: ArrayView2D;
  /** Detected centroids in pixel coordinates, sorted by (y, x). */
  centroids: Point[];
}

function requireKind(view: ArrayView2D, kind: string, name: string): void {
  checkView(view);
  if (view.kind !== kind) {
    throw new TypeError(`${name} must be ${kind}, got ${view.kind}`);
  }
}

function writeNpy(dir: string, name: string, view: ArrayView2D): string {
  const path = join(dir, name);
  writeFileSync(path, encodeNpy(view));
  return path;
}

function readNpy(path: string): ArrayView2D {
  return decodeNpy(readFileSync(path));
}

/**
 * Split a tissue probability map into per-cross-section instance labels
 * using the predicted centroid distance maps.
 *
 * Numerically identical to the `postprocess` subcommand; inputs are
 * never mutated.
 */
export function separate(
  tissue: ArrayView2D,
  pen: ArrayView2D,
  hdist: ArrayView2D,
  vdist: ArrayView2D,
  config: SeparateConfig = {},
): SeparateResult {
  requireKind(tissue, "f32", "tissue");
  requireKind(pen, "f32", "pen");
  requireKind(hdist, "f32", "hdist");
  requireKind(vdist, "f32", "vdist");
  sameShape(tissue, pen, hdist, vdist);

  return withTempDir((dir) => {
    const outDir = join(dir, "out");
    const args = [
      "postprocess",
      "--tissue", writeNpy(dir, "tissue.npy", tissue),
      "--pen", writeNpy(dir, "pen.npy", pen),
      "--hdist", writeNpy(dir, "hdist.npy", hdist),
      "--vdist", writeNpy(dir, "vdist.npy", vdist),
      "--out-dir", outDir,
    ];
    if (config.k !== undefined) args.push("--k", String(config.k));
    if (config.sigma !== undefined) args.push("--sigma", String(config.sigma));
    if (config.window !== undefined) args.push("--window", String(config.window));
    if (config.percentile !== undefined) {
      args.push("--percentile", String(config.percentile));
    }
    if (config.probThreshold !== undefined) {
      args.push("--prob-threshold", String(config.probThreshold));
    }
    if (config.subtractPen) args.push("--subtract-pen");
    runCore(args);

    const labels = readNpy(join(outDir, "instances.npy"));
    const centroids: Point[] = JSON.parse(
      readFileSync(join(outDir, "centroids.json"), "utf8"),
    );
    return { labels, centroids };
  });
}

/** Dice overlap of two binary masks; 1.0 when both are empty. */
export function diceScore(pred: ArrayView2D, gt: ArrayView2D): number {
  requireKind(pred, "u8", "pred");
  requireKind(gt, "u8", "gt");
  sameShape(pred, gt);
  let inter = 0;
  let total = 0;
  for (let i = 0; i < pred.data.length; i += 1) {
    const a = pred.data[i] !== 0 ? 1 : 0;
    const b = gt.data[i] !== 0 ? 1 : 0;
    inter += a & b;
    total += a + b;
  }
  return total === 0 ? 1.0 : (2 * inter) / total;
}

/** Absolute difference between the predicted and true instance counts. */
export function countError(labels: ArrayView2D, gtCount: number): number {
  checkView(labels);
  if (labels.kind === "f32") {
    throw new TypeError("labels must be an unsigned integer map");
  }
  if (!Number.isInteger(gtCount) || gtCount < 0) {
    throw new RangeError(`gtCount must be a non-negative integer, got ${gtCount}`);
  }
  let maxLabel = 0;
  for (let i = 0; i < labels.data.length; i += 1) {
    if (labels.data[i] > maxLabel) maxLabel = labels.data[i] as number;
  }
  return Math.abs(maxLabel - gtCount);
}

export interface SceneParams {
  height?: number;
  width?: number;
  /** Exact number of cross-sections to place. */
  sections?: number;
  sizeRange?: [number, number];
  fragmentationProb?: number;
  maxFragments?: number;
  adjacencyProb?: number;
  penStrokes?: number;
  minSeparation?: number;
  seed: number;
}

export interface NoiseParams {
  distNoiseSigma?: number;
  maskFlipProb?: number;
  boundaryJitter?: number;
  probBlurSigma?: number;
}

export interface SyntheticScene {
  gtInstances: ArrayView2D;
  tissue: ArrayView2D;
  pen: ArrayView2D;
  hDist: ArrayView2D;
  vDist: ArrayView2D;
  centroids: Point[];
  gtCount: number;
}

export interface PredictionBundle {
  tissueProb: ArrayView2D;
  penProb: ArrayView2D;
  hDist: ArrayView2D;
  vDist: ArrayView2D;
}

function synthArgs(dir: string, params: SceneParams, noise: NoiseParams): string[] {
  const args = [
    "synth",
    "--out-dir", dir,
    "--n", "1",
    "--seed", String(params.seed),
  ];
  if (params.height !== undefined) args.push("--height", String(params.height));
  if (params.width !== undefined) args.push("--width", String(params.width));
  if (params.sections !== undefined) {
    args.push("--sections", `${params.sections},${params.sections}`);
  }
  if (params.sizeRange !== undefined) {
    args.push("--size-range", `${params.sizeRange[0]},${params.sizeRange[1]}`);
  }
  if (params.fragmentationProb !== undefined) {
    args.push("--fragmentation-prob", String(params.fragmentationProb));
  }
  if (params.maxFragments !== undefined) {
    args.push("--max-fragments", String(params.maxFragments));
  }
  if (params.adjacencyProb !== undefined) {
    args.push("--adjacency-prob", String(params.adjacencyProb));
  }
  if (params.penStrokes !== undefined) {
    args.push("--pen-strokes", String(params.penStrokes));
  }
  if (params.minSeparation !== undefined) {
    args.push("--min-separation", String(params.minSeparation));
  }
  if (noise.distNoiseSigma !== undefined) {
    args.push("--dist-noise-sigma", String(noise.distNoiseSigma));
  }
  if (noise.maskFlipProb !== undefined) {
    args.push("--mask-flip-prob", String(noise.maskFlipProb));
  }
  if (noise.boundaryJitter !== undefined) {
    args.push("--boundary-jitter", String(noise.boundaryJitter));
  }
  if (noise.probBlurSigma !== undefined) {
    args.push("--prob-blur-sigma", String(noise.probBlurSigma));
  }
  return args;
}

/**
 * Generate one seeded synthetic scene with exact ground truth masks,
 * centroids, and distance maps (via the `synth` subcommand with noise
 * disabled, so the distance maps are the exact ground truth).
 */
export function generateScene(params: SceneParams): SyntheticScene {
  return withTempDir((dir) => {
    runCore(synthArgs(dir, params, {}));
    const manifest = JSON.parse(readFileSync(join(dir, "manifest.json"), "utf8"));
    const scene = manifest.scenes[0];
    return {
      gtInstances: readNpy(join(dir, "scene_0000.gt_instances.npy")),
      tissue: readNpy(join(dir, "scene_0000.tissue.npy")),
      pen: readNpy(join(dir, "scene_0000.pen.npy")),
      hDist: readNpy(join(dir, "scene_0000.hdist.npy")),
      vDist: readNpy(join(dir, "scene_0000.vdist.npy")),
      centroids: scene.centroids,
      gtCount: scene.gt_count,
    };
  });
}

/**
 * Generate a scene and its noise-corrupted prediction bundle in one
 * call. With all noise fields at zero the bundle equals the ground
 * truth maps exactly.
 */
export function corrupt(
  params: SceneParams,
  noise: NoiseParams,
): PredictionBundle {
  return withTempDir((dir) => {
    runCore(synthArgs(dir, params, noise));
    return {
      tissueProb: readNpy(join(dir, "scene_0000.tissue_prob.npy")),
      penProb: readNpy(join(dir, "scene_0000.pen_prob.npy")),
      hDist: readNpy(join(dir, "scene_0000.hdist.npy")),
      vDist: readNpy(join(dir, "scene_0000.vdist.npy")),
    };
  });
}

/** Semantic version of the underlying core tool. */
export function version(): string {
  return runCore(["--version"]).trim();
}
