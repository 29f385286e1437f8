"""Cross-section separation from predicted centroid-distance maps.

The pipeline has four steps:

1. Subtract the predicted horizontal/vertical distance maps from the pixel
   coordinate maps and mask by the tissue segmentation, giving per-pixel
   predicted centroid coordinates.
2. Bin the predicted centroids of all foreground pixels into a 2D histogram
   whose bins are k x k pixels, then smooth it with a Gaussian.
3. Find histogram maxima by comparing against a max-filtered copy and
   keeping bins that also exceed a percentile threshold of the bin values.
4. Assign every foreground pixel to the nearest surviving centroid.

Fragments of one cross-section all point at the same centroid and therefore
end up in the same histogram bin, while adjacent cross-sections point at
different bins, so this both joins fragments and splits touching sections.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import (
    DimensionError,
    PredictionBundle,
    as_mask,
    as_scalar_map,
    check_same_shape,
    threshold,
)


@dataclass(frozen=True)
class PostProcessConfig:
    """Hyperparameters of the separation pipeline.

    k: histogram bin side in pixels.
    sigma: Gaussian smoothing std in bins.
    s: max-filter window side in bins (odd).
    t_percentile: percentile of smoothed bin values used as the peak
        threshold (peaks must strictly exceed it).
    prob_threshold: probability cutoff for binarizing the sigmoid heads.
    """

    k: int = 20
    sigma: float = 2.0
    s: int = 15
    t_percentile: float = 98.0
    prob_threshold: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.s < 1 or self.s % 2 == 0:
            raise ValueError(f"s must be odd and >= 1, got {self.s}")
        if not 0.0 <= self.t_percentile <= 100.0:
            raise ValueError(f"t_percentile must be in [0, 100], got {self.t_percentile}")


@dataclass(frozen=True)
class CentroidMap:
    """Per-pixel predicted centroid coordinates, valid on the tissue mask.

    Background pixels carry 0 in both coordinate channels.
    """

    cx: np.ndarray
    cy: np.ndarray
    mask: np.ndarray

    @property
    def shape(self):
        return self.mask.shape


@dataclass(frozen=True)
class Histogram2D:
    """Bin counts of predicted centroid locations.

    counts is float so it can also hold smoothed values. source_shape is
    the (height, width) of the image the histogram was built from; it is
    carried along so peak coordinates can be clamped to image bounds.
    """

    counts: np.ndarray
    k: int
    source_shape: tuple

    @property
    def bin_h(self):
        return self.counts.shape[0]

    @property
    def bin_w(self):
        return self.counts.shape[1]


def build_centroid_map(tissue, h_dist, v_dist) -> CentroidMap:
    """Step 1: recover predicted centroid coordinates per foreground pixel.

    cx = x - h_dist and cy = y - v_dist on the tissue foreground, 0 on the
    background.
    """
    mask = as_mask(tissue)
    h_dist = as_scalar_map(h_dist)
    v_dist = as_scalar_map(v_dist)
    check_same_shape(mask, h_dist, v_dist)
    h, w = mask.shape
    cx = np.arange(w, dtype=np.float64)[None, :] - h_dist
    cy = np.arange(h, dtype=np.float64)[:, None] - v_dist
    cx *= mask
    cy *= mask
    return CentroidMap(cx=cx, cy=cy, mask=mask)


def build_histogram(cmap: CentroidMap, k: int) -> Histogram2D:
    """Step 2a: bin the predicted centroids of all foreground pixels.

    Histogram dims are the ceiling of image dims divided by k. Predicted
    coordinates falling outside the image are clamped to its bounds before
    binning, so the total count always equals the foreground pixel count.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    h, w = cmap.shape
    bin_h = -(-h // k)
    bin_w = -(-w // k)
    fg = cmap.mask
    cx = np.clip(cmap.cx[fg], 0.0, w - 1.0)
    cy = np.clip(cmap.cy[fg], 0.0, h - 1.0)
    rows = np.floor_divide(cy, k).astype(np.intp)
    cols = np.floor_divide(cx, k).astype(np.intp)
    flat = np.bincount(rows * bin_w + cols, minlength=bin_h * bin_w)
    counts = flat.astype(np.float64).reshape(bin_h, bin_w)
    return Histogram2D(counts=counts, k=k, source_shape=(h, w))


def _gaussian_kernel_1d(sigma: float) -> np.ndarray:
    radius = int(np.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def smooth_histogram(hist: Histogram2D, sigma: float) -> Histogram2D:
    """Step 2b: separable Gaussian smoothing of the histogram.

    The kernel is truncated at radius ceil(4*sigma), normalized to unit sum
    and applied with zero padding at the borders. sigma = 0 is the identity.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return Histogram2D(counts=hist.counts.copy(), k=hist.k,
                           source_shape=hist.source_shape)
    kernel = _gaussian_kernel_1d(sigma)
    smoothed = ndimage.convolve1d(hist.counts, kernel, axis=0,
                                  mode="constant", cval=0.0)
    smoothed = ndimage.convolve1d(smoothed, kernel, axis=1,
                                  mode="constant", cval=0.0)
    return Histogram2D(counts=smoothed, k=hist.k, source_shape=hist.source_shape)


def find_centroids(hist: Histogram2D, s: int, t_percentile: float) -> np.ndarray:
    """Step 3: non-maximum suppression on the (smoothed) histogram.

    A bin survives when it equals the s x s max-filter output (replicate
    borders) and strictly exceeds the t_percentile-th percentile of all bin
    values (zeros included, linear interpolation). Plateaus of equal-valued
    8-connected surviving bins collapse to their mean bin position. Each
    surviving peak converts to pixel coordinates at its bin center, clamped
    to the image bounds.

    Returns an (n, 2) float array of (x, y) pixel coordinates sorted
    ascending by (y, x).
    """
    if s < 1 or s % 2 == 0:
        raise ValueError(f"s must be odd and >= 1, got {s}")
    values = hist.counts
    max_filtered = ndimage.maximum_filter(values, size=s, mode="nearest")
    thresh = np.percentile(values, t_percentile)
    surviving = (values == max_filtered) & (values > thresh)
    if not surviving.any():
        return np.zeros((0, 2), dtype=np.float64)

    eight = np.ones((3, 3), dtype=bool)
    peaks = []
    for level in np.unique(values[surviving]):
        labeled, n = ndimage.label(surviving & (values == level), structure=eight)
        for idx in range(1, n + 1):
            rows, cols = np.nonzero(labeled == idx)
            peaks.append((rows.mean(), cols.mean()))

    h, w = hist.source_shape
    k = hist.k
    coords = np.array(
        [
            (
                min(max((c + 0.5) * k - 0.5, 0.0), w - 1.0),
                min(max((r + 0.5) * k - 0.5, 0.0), h - 1.0),
            )
            for r, c in peaks
        ],
        dtype=np.float64,
    )
    coords = np.unique(coords, axis=0)
    order = np.lexsort((coords[:, 0], coords[:, 1]))
    return coords[order]


def assign_instances(cmap: CentroidMap, centroids: np.ndarray) -> np.ndarray:
    """Step 4: label each foreground pixel by its nearest centroid.

    Labels are 1-based indices into the centroid array; background stays 0.
    Ties go to the lowest centroid index (i.e. the smallest (y, x) in the
    canonical ordering).
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim != 2 or centroids.shape[1] != 2 or len(centroids) == 0:
        raise ValueError("centroids must be a non-empty (n, 2) array")
    labels = np.zeros(cmap.shape, dtype=np.int32)
    fg = cmap.mask
    if not fg.any():
        return labels
    px = cmap.cx[fg]
    py = cmap.cy[fg]
    best = np.zeros(px.shape, dtype=np.int32)
    best_d2 = np.full(px.shape, np.inf)
    for i, (x, y) in enumerate(centroids):
        d2 = (px - x) ** 2 + (py - y) ** 2
        closer = d2 < best_d2
        best[closer] = i
        best_d2[closer] = d2[closer]
    labels[fg] = best + 1
    return labels


def _compact_labels(labels: np.ndarray, centroids: np.ndarray):
    """Renumber labels to the contiguous range 1..C of labels actually used,
    dropping centroids no pixel was assigned to."""
    used = np.unique(labels)
    used = used[used > 0]
    if len(used) == len(centroids) and (used == np.arange(1, len(used) + 1)).all():
        return labels, centroids
    remap = np.zeros(int(labels.max()) + 1, dtype=np.int32)
    remap[used] = np.arange(1, len(used) + 1, dtype=np.int32)
    return remap[labels], centroids[used - 1]


def separate_from_masks(tissue, h_dist, v_dist, cfg: PostProcessConfig):
    """Run steps 1-4 on an already-binarized tissue mask.

    Returns (labels, centroids). If no histogram bin survives NMS but
    tissue foreground exists, the global-max bin of the smoothed histogram
    is used as the sole centroid so tissue pixels are never left unlabeled.
    """
    cmap = build_centroid_map(tissue, h_dist, v_dist)
    if not cmap.mask.any():
        return np.zeros(cmap.shape, dtype=np.int32), np.zeros((0, 2), dtype=np.float64)
    hist = build_histogram(cmap, cfg.k)
    smoothed = smooth_histogram(hist, cfg.sigma)
    centroids = find_centroids(smoothed, cfg.s, cfg.t_percentile)
    if len(centroids) == 0:
        r, c = np.unravel_index(np.argmax(smoothed.counts), smoothed.counts.shape)
        h, w = smoothed.source_shape
        centroids = np.array(
            [
                (
                    min(max((c + 0.5) * cfg.k - 0.5, 0.0), w - 1.0),
                    min(max((r + 0.5) * cfg.k - 0.5, 0.0), h - 1.0),
                )
            ],
            dtype=np.float64,
        )
    labels = assign_instances(cmap, centroids)
    return _compact_labels(labels, centroids)


def separate(bundle: PredictionBundle, cfg: PostProcessConfig = PostProcessConfig()):
    """Full pipeline on a prediction bundle.

    Returns (tissue_mask, pen_mask, instance_labels, centroids) where
    centroids is an (n, 2) array of (x, y) pixel coordinates, row i
    corresponding to label i + 1.
    """
    tissue = threshold(bundle.tissue_prob, cfg.prob_threshold)
    pen = threshold(bundle.pen_prob, cfg.prob_threshold)
    labels, centroids = separate_from_masks(tissue, bundle.h_dist, bundle.v_dist, cfg)
    return tissue, pen, labels, centroids
