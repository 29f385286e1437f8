"""Tissue cross-section separation toolkit.

Separates (and re-joins fragmented) tissue cross-sections from per-pixel
model predictions via centroid clustering in a 2D histogram, with
segmentation losses/metrics, a synthetic scene generator for verification,
a forward-only reference network, and NPY/PNG/CLI interfaces.
"""

__version__ = "0.1.0"

from .core import (
    DimensionError,
    PredictionBundle,
    coordinate_maps,
    crop_to,
    pad_to_multiple,
    threshold,
)
from .losses import (
    LossWeights,
    bce_loss,
    count_error,
    dice_loss,
    dice_score,
    gradient_mse_loss,
    mse_loss,
    total_loss,
)
from .network import NetworkConfig, forward, init_weights, total_downsampling
from .postprocess import (
    CentroidMap,
    Histogram2D,
    PostProcessConfig,
    assign_instances,
    build_centroid_map,
    build_histogram,
    find_centroids,
    separate,
    separate_from_masks,
    smooth_histogram,
)
from .synth import (
    GenerationError,
    NoiseParams,
    SceneParams,
    SyntheticScene,
    corrupt,
    generate_scene,
    render_pen_strokes,
)

__all__ = [
    "DimensionError",
    "PredictionBundle",
    "coordinate_maps",
    "crop_to",
    "pad_to_multiple",
    "threshold",
    "LossWeights",
    "bce_loss",
    "count_error",
    "dice_loss",
    "dice_score",
    "gradient_mse_loss",
    "mse_loss",
    "total_loss",
    "NetworkConfig",
    "forward",
    "init_weights",
    "total_downsampling",
    "CentroidMap",
    "Histogram2D",
    "PostProcessConfig",
    "assign_instances",
    "build_centroid_map",
    "build_histogram",
    "find_centroids",
    "separate",
    "separate_from_masks",
    "smooth_histogram",
    "GenerationError",
    "NoiseParams",
    "SceneParams",
    "SyntheticScene",
    "corrupt",
    "generate_scene",
    "render_pen_strokes",
]
