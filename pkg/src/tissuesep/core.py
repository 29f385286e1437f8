"""Raster types, coordinate conventions, thresholding and padding.

All rasters are 2D numpy arrays in row-major order. Scalar maps are float64
internally (file I/O narrows to float32), masks are bool. Pixel coordinates
follow the image convention: x is the column index increasing rightward,
y is the row index increasing downward, both 0-based.
"""

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Raised when raster dimensions are invalid or inconsistent."""


def as_scalar_map(values) -> np.ndarray:
    """Validate and convert input to a 2D float64 scalar map."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"scalar map must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"scalar map dimensions must be >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scalar map contains non-finite values")
    return arr


def as_mask(bits) -> np.ndarray:
    """Validate and convert input to a 2D boolean mask."""
    arr = np.asarray(bits)
    if arr.ndim != 2:
        raise DimensionError(f"mask must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"mask dimensions must be >= 1, got {arr.shape}")
    return arr.astype(bool)


def check_same_shape(*arrays):
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise DimensionError(f"inconsistent raster shapes: {sorted(shapes)}")


@dataclass(frozen=True)
class PredictionBundle:
    """The four per-pixel model outputs: two probabilities, two distances.

    tissue_prob / pen_prob are sigmoid probabilities in [0, 1]; h_dist and
    v_dist are signed distances to the owning cross-section centroid, in
    pixels. All four share the same shape.
    """

    tissue_prob: np.ndarray
    pen_prob: np.ndarray
    h_dist: np.ndarray
    v_dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tissue_prob", as_scalar_map(self.tissue_prob))
        object.__setattr__(self, "pen_prob", as_scalar_map(self.pen_prob))
        object.__setattr__(self, "h_dist", as_scalar_map(self.h_dist))
        object.__setattr__(self, "v_dist", as_scalar_map(self.v_dist))
        check_same_shape(self.tissue_prob, self.pen_prob, self.h_dist, self.v_dist)
        for name in ("tissue_prob", "pen_prob"):
            p = getattr(self, name)
            if p.min() < 0.0 or p.max() > 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def shape(self):
        return self.tissue_prob.shape


def coordinate_maps(height: int, width: int):
    """Return (horizontal, vertical) pixel coordinate maps.

    The horizontal map holds x (the column index) at every pixel, the
    vertical map holds y (the row index).
    """
    if height < 1 or width < 1:
        raise DimensionError(f"dimensions must be >= 1, got {height}x{width}")
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    hmap = np.broadcast_to(xs[None, :], (height, width)).copy()
    vmap = np.broadcast_to(ys[:, None], (height, width)).copy()
    return hmap, vmap


def threshold(scalar_map, t: float) -> np.ndarray:
    """Binarize a scalar map: bit set where value >= t."""
    arr = as_scalar_map(scalar_map)
    if not np.isfinite(t):
        raise ValueError("threshold must be finite")
    return arr >= t


def pad_to_multiple(raster, m: int):
    """Pad a 2D raster with zeros at the bottom/right to multiples of m.

    Returns (padded, original_shape). Padding only appends rows/columns, so
    pixel coordinates of the original content are unchanged.
    """
    if m < 1:
        raise ValueError(f"multiple must be >= 1, got {m}")
    arr = np.asarray(raster)
    if arr.ndim != 2:
        raise DimensionError(f"raster must be 2D, got shape {arr.shape}")
    h, w = arr.shape
    ph = -(-h // m) * m
    pw = -(-w // m) * m
    if (ph, pw) == (h, w):
        return arr.copy(), (h, w)
    out = np.zeros((ph, pw), dtype=arr.dtype)
    out[:h, :w] = arr
    return out, (h, w)


def crop_to(raster, original_shape):
    """Undo pad_to_multiple: crop back to the recorded original shape."""
    h, w = original_shape
    arr = np.asarray(raster)
    if arr.shape[0] < h or arr.shape[1] < w:
        raise DimensionError(
            f"cannot crop shape {arr.shape} to larger shape {(h, w)}"
        )
    return arr[:h, :w].copy()
