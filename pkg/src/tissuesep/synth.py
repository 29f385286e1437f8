"""Synthetic slide scenes with exact ground truth.

Generates canvases of blob-shaped "cross-sections" (unions of overlapping
ellipses) with optional fragmentation into disjoint pieces, adjacent
placement of consecutive sections (touching but not overlapping), and pen
strokes. Every scene ships with exact instance labels, centroids and
distance-to-centroid maps, so the separation pipeline can be verified end
to end without any trained model.

All randomness flows through numpy's PCG64 generator seeded from the
parameter seed, so identical parameters reproduce identical scenes
byte for byte.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .core import PredictionBundle


class GenerationError(RuntimeError):
    """Raised when a scene cannot be built within the retry budget."""


@dataclass(frozen=True)
class SceneParams:
    height: int = 512
    width: int = 512
    n_sections: int = 3
    size_range: tuple = (20, 40)
    fragmentation_prob: float = 0.0
    max_fragments: int = 3
    adjacency_prob: float = 0.0
    n_pen_strokes: int = 0
    min_centroid_separation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.height < 64 or self.width < 64:
            raise ValueError("canvas dimensions must be >= 64")
        if self.n_sections < 0:
            raise ValueError("n_sections must be >= 0")
        lo, hi = self.size_range
        if not (1 <= lo <= hi):
            raise ValueError(f"invalid size_range {self.size_range}")
        if self.max_fragments < 2:
            raise ValueError("max_fragments must be >= 2")
        for name in ("fragmentation_prob", "adjacency_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


@dataclass(frozen=True)
class NoiseParams:
    dist_noise_sigma: float = 0.0
    mask_flip_prob: float = 0.0
    boundary_jitter: int = 0
    prob_blur_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.dist_noise_sigma, self.mask_flip_prob,
               self.boundary_jitter, self.prob_blur_sigma) < 0:
            raise ValueError("noise parameters must be >= 0")


@dataclass(frozen=True)
class SyntheticScene:
    gt_instances: np.ndarray   # int32, 0 = background, 1..C = sections
    tissue: np.ndarray         # bool
    pen: np.ndarray            # bool
    centroids: np.ndarray      # (C, 2) float64 (x, y), one per instance
    gt_h_dist: np.ndarray      # float64, x - centroid_x on foreground
    gt_v_dist: np.ndarray      # float64, y - centroid_y on foreground

    @property
    def shape(self):
        return self.gt_instances.shape

    @property
    def n_instances(self):
        return len(self.centroids)


_EIGHT = np.ones((3, 3), dtype=bool)


def _random_blob(rng, size_range):
    """Union of 1-3 overlapping random ellipses on a local canvas.

    Returns (mask, center) with center the canvas midpoint the first
    ellipse was anchored at.
    """
    lo, hi = size_range
    n_ellipses = int(rng.integers(1, 4))
    margin = int(np.ceil(hi * 1.9)) + 2
    side = 2 * margin + 1
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    mask = np.zeros((side, side), dtype=bool)
    c0 = np.array([margin, margin], dtype=np.float64)  # (x, y)
    first_axes = None
    for i in range(n_ellipses):
        a = rng.uniform(lo, hi)
        b = rng.uniform(lo, hi)
        theta = rng.uniform(0.0, np.pi)
        if i == 0:
            cx, cy = c0
            first_axes = (a, b)
        else:
            r = rng.uniform(0.0, 0.8 * min(first_axes))
            phi = rng.uniform(0.0, 2.0 * np.pi)
            cx = c0[0] + r * np.cos(phi)
            cy = c0[1] + r * np.sin(phi)
        u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
        v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
        mask |= (u / a) ** 2 + (v / b) ** 2 <= 1.0
    return mask, c0


def _trim(mask):
    """Crop a boolean array to its bounding box; returns (cropped, (r0, c0))."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1 = rows[0], rows[-1] + 1
    c0, c1 = cols[0], cols[-1] + 1
    return mask[r0:r1, c0:c1], (r0, c0)


def _paste_overlap(canvas_occ, blob, top, left):
    """Count of overlapping pixels if blob were pasted at (top, left);
    returns None when the blob would leave the canvas."""
    h, w = blob.shape
    if top < 0 or left < 0 or top + h > canvas_occ.shape[0] or left + w > canvas_occ.shape[1]:
        return None
    return int(np.count_nonzero(canvas_occ[top:top + h, left:left + w] & blob))


def _blob_centroid(blob, top, left):
    ys, xs = np.nonzero(blob)
    return np.array([left + xs.mean(), top + ys.mean()])


def _fragment(rng, blob, max_fragments):
    """Remove pixels along random band-shaped cuts through the blob."""
    n_cuts = int(rng.integers(1, max_fragments))
    ys, xs = np.nonzero(blob)
    extent = max(np.ptp(xs), np.ptp(ys), 1)
    out = blob.copy()
    for _ in range(n_cuts):
        ys, xs = np.nonzero(out)
        cx, cy = xs.mean(), ys.mean()
        angle = rng.uniform(0.0, np.pi)
        offset = rng.uniform(-0.3, 0.3) * extent
        halfwidth = rng.uniform(1.5, 3.0)
        nx, ny = np.cos(angle), np.sin(angle)
        yy, xx = np.mgrid[0:out.shape[0], 0:out.shape[1]].astype(np.float64)
        dist = (xx - cx) * nx + (yy - cy) * ny - offset
        cut = out & (np.abs(dist) <= halfwidth)
        remaining = out & ~cut
        # never let a cut destroy the section outright
        if remaining.sum() < 0.4 * blob.sum():
            continue
        out = remaining
    return out


def _place_adjacent(rng, occupied, prev_mask_global, prev_centroid, blob, blob_center):
    """Slide a blob toward the previous section until the masks touch
    (share an 8-connected boundary) without overlapping.

    Returns (top, left) or None when no touching placement exists along the
    sampled direction.
    """
    angle = rng.uniform(0.0, 2.0 * np.pi)
    u = np.array([np.cos(angle), np.sin(angle)])  # (x, y)

    ys, xs = np.nonzero(prev_mask_global)
    e_prev = np.max((xs - prev_centroid[0]) * u[0] + (ys - prev_centroid[1]) * u[1])
    bys, bxs = np.nonzero(blob)
    e_new = np.max(-((bxs - blob_center[0]) * u[0] + (bys - blob_center[1]) * u[1]))

    t_start = int(np.ceil(e_prev + e_new)) + 3
    last_free = None
    for t in range(t_start, 0, -1):
        cx = prev_centroid[0] + t * u[0]
        cy = prev_centroid[1] + t * u[1]
        top = int(round(cy - blob_center[1]))
        left = int(round(cx - blob_center[0]))
        overlap = _paste_overlap(occupied, blob, top, left)
        if overlap is None:
            continue
        if overlap > 0:
            return last_free
        last_free = (top, left)
    return None


def _dilate_padded(blob):
    """8-connected dilation with one pixel of headroom on every side."""
    return ndimage.binary_dilation(np.pad(blob, 1), structure=_EIGHT)


def _touches(occupied, blob, top, left):
    dil = _dilate_padded(blob)
    top, left = top - 1, left - 1
    h, w = dil.shape
    t0, l0 = max(top, 0), max(left, 0)
    t1 = min(top + h, occupied.shape[0])
    l1 = min(left + w, occupied.shape[1])
    if t1 <= t0 or l1 <= l0:
        return False
    window = occupied[t0:t1, l0:l1]
    piece = dil[t0 - top:t1 - top, l0 - left:l1 - left]
    return bool(np.any(window & piece))


def _build_labels(rng, params):
    """One attempt at laying out all sections; returns labels or None."""
    h, w = params.height, params.width
    labels = np.zeros((h, w), dtype=np.int32)
    occupied = np.zeros((h, w), dtype=bool)
    centroids = []
    prev_mask = None
    prev_centroid = None

    for section in range(params.n_sections):
        placed = False
        for _ in range(60):
            blob, center = _random_blob(rng, params.size_range)
            blob, (dr, dc) = _trim(blob)
            center = center - np.array([dc, dr])
            adjacent = (
                section > 0
                and prev_mask is not None
                and rng.random() < params.adjacency_prob
            )
            if adjacent:
                pos = _place_adjacent(rng, occupied, prev_mask, prev_centroid,
                                      blob, center)
                if pos is None:
                    continue
                top, left = pos
                if not _touches(occupied, blob, top, left):
                    continue
            else:
                bh, bw = blob.shape
                if bh + 2 >= h or bw + 2 >= w:
                    continue
                top = int(rng.integers(1, h - bh - 1))
                left = int(rng.integers(1, w - bw - 1))
                # keep an empty 1px ring so non-adjacent sections never touch
                if _paste_overlap(occupied, _dilate_padded(blob), top - 1, left - 1):
                    continue
            if params.fragmentation_prob > 0 and rng.random() < params.fragmentation_prob:
                blob = _fragment(rng, blob, params.max_fragments)
            c = _blob_centroid(blob, top, left)
            if params.min_centroid_separation > 0 and centroids:
                d = np.hypot(*(np.array(centroids) - c).T)
                if d.min() < params.min_centroid_separation:
                    continue
            region = labels[top:top + blob.shape[0], left:left + blob.shape[1]]
            region[blob] = section + 1
            occupied[top:top + blob.shape[0], left:left + blob.shape[1]] |= blob
            full = np.zeros((h, w), dtype=bool)
            full[top:top + blob.shape[0], left:left + blob.shape[1]] = blob
            prev_mask = full
            prev_centroid = c
            centroids.append(c)
            placed = True
            break
        if not placed:
            return None
    return labels


def _exact_ground_truth(labels):
    """Centroids and distance maps recomputed exactly from the label map."""
    n = int(labels.max())
    h, w = labels.shape
    gt_h = np.zeros((h, w), dtype=np.float64)
    gt_v = np.zeros((h, w), dtype=np.float64)
    centroids = np.zeros((n, 2), dtype=np.float64)
    for i in range(1, n + 1):
        ys, xs = np.nonzero(labels == i)
        cx, cy = xs.mean(), ys.mean()
        centroids[i - 1] = (cx, cy)
        gt_h[ys, xs] = xs - cx
        gt_v[ys, xs] = ys - cy
    return centroids, gt_h, gt_v


def generate_scene(params: SceneParams) -> SyntheticScene:
    """Build a scene deterministically from its parameters.

    Raises GenerationError when the layout constraints (non-overlap,
    adjacency, centroid separation) cannot be satisfied after bounded
    retries.
    """
    rng = np.random.Generator(np.random.PCG64(params.seed))
    h, w = params.height, params.width
    if params.n_sections == 0:
        labels = np.zeros((h, w), dtype=np.int32)
    else:
        labels = None
        for _ in range(25):
            labels = _build_labels(rng, params)
            if labels is not None:
                break
        if labels is None:
            raise GenerationError(
                f"could not place {params.n_sections} sections of size "
                f"{params.size_range} with min separation "
                f"{params.min_centroid_separation} on a {h}x{w} canvas"
            )
    centroids, gt_h, gt_v = _exact_ground_truth(labels)
    scene = SyntheticScene(
        gt_instances=labels,
        tissue=labels > 0,
        pen=np.zeros((h, w), dtype=bool),
        centroids=centroids,
        gt_h_dist=gt_h,
        gt_v_dist=gt_v,
    )
    if params.n_pen_strokes > 0:
        scene = render_pen_strokes(scene, params.n_pen_strokes,
                                   seed=int(rng.integers(0, 2**63)))
    return scene


def _stamp_segment(pen, p0, p1, halfwidth):
    """Mark all pixels within halfwidth of the segment p0-p1 ((x, y) coords)."""
    h, w = pen.shape
    pad = int(np.ceil(halfwidth)) + 1
    x0 = max(int(min(p0[0], p1[0])) - pad, 0)
    x1 = min(int(max(p0[0], p1[0])) + pad + 1, w)
    y0 = max(int(min(p0[1], p1[1])) - pad, 0)
    y1 = min(int(max(p0[1], p1[1])) + pad + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1].astype(np.float64)
    d = np.array(p1) - np.array(p0)
    length2 = d @ d
    if length2 == 0:
        dist = np.hypot(xx - p0[0], yy - p0[1])
    else:
        t = np.clip(((xx - p0[0]) * d[0] + (yy - p0[1]) * d[1]) / length2, 0.0, 1.0)
        dist = np.hypot(xx - (p0[0] + t * d[0]), yy - (p0[1] + t * d[1]))
    pen[y0:y1, x0:x1] |= dist <= halfwidth


def render_pen_strokes(scene: SyntheticScene, n: int, seed: int) -> SyntheticScene:
    """Add n random thick polyline strokes to the pen mask.

    Strokes may cross tissue; the tissue mask and instance labels are left
    untouched.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return scene
    rng = np.random.Generator(np.random.PCG64(seed))
    h, w = scene.shape
    pen = scene.pen.copy()
    for _ in range(n):
        x = rng.uniform(0, w)
        y = rng.uniform(0, h)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        halfwidth = rng.uniform(1.5, 3.5)
        n_segments = int(rng.integers(2, 6))
        for _ in range(n_segments):
            step = rng.uniform(0.08, 0.25) * min(h, w)
            angle += rng.uniform(-0.8, 0.8)
            nx = np.clip(x + step * np.cos(angle), 0, w - 1)
            ny = np.clip(y + step * np.sin(angle), 0, h - 1)
            _stamp_segment(pen, (x, y), (nx, ny), halfwidth)
            x, y = nx, ny
    return replace(scene, pen=pen)


def _corrupt_mask(rng, mask, noise: NoiseParams):
    """Flip pixels, jitter the boundary, then blur into soft probabilities.

    The RNG is consumed in that fixed order so corruption is reproducible.
    """
    m = mask.copy()
    if noise.mask_flip_prob > 0:
        flips = rng.random(m.shape) < noise.mask_flip_prob
        m = m ^ flips
    if noise.boundary_jitter > 0:
        r = int(rng.integers(-noise.boundary_jitter, noise.boundary_jitter + 1))
        if r > 0:
            m = ndimage.binary_dilation(m, structure=_EIGHT, iterations=r)
        elif r < 0:
            m = ndimage.binary_erosion(m, structure=_EIGHT, iterations=-r)
    prob = m.astype(np.float64)
    if noise.prob_blur_sigma > 0:
        prob = ndimage.gaussian_filter(prob, noise.prob_blur_sigma,
                                       mode="constant", cval=0.0)
    return np.clip(prob, 0.0, 1.0)


def corrupt(scene: SyntheticScene, noise: NoiseParams) -> PredictionBundle:
    """Emulate imperfect model outputs for a scene.

    With all-zero noise the bundle round-trips exactly: thresholding the
    probabilities at 0.5 recovers the masks and the distance maps equal
    ground truth.
    """
    rng = np.random.Generator(np.random.PCG64(noise.seed))
    tissue_prob = _corrupt_mask(rng, scene.tissue, noise)
    pen_prob = _corrupt_mask(rng, scene.pen, noise)
    h_dist = scene.gt_h_dist.copy()
    v_dist = scene.gt_v_dist.copy()
    if noise.dist_noise_sigma > 0:
        h_dist += rng.normal(0.0, noise.dist_noise_sigma, h_dist.shape)
        v_dist += rng.normal(0.0, noise.dist_noise_sigma, v_dist.shape)
    return PredictionBundle(tissue_prob=tissue_prob, pen_prob=pen_prob,
                            h_dist=h_dist, v_dist=v_dist)
