"""Forward-only reference of the single-encoder, three-decoder U-Net.

This validates the architectural contract, not predictive quality: shapes
are preserved end to end, the encoder downsamples by a factor of 2 at the
top level and 4 everywhere below (512x in total with the defaults, which
matches the pad-to-512 rule), the segmentation heads end in a sigmoid, and
the distance head is multiplied pixelwise by the predicted tissue
probability. Weights are drawn deterministically from a seed; there is no
training code.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import DimensionError, PredictionBundle


@dataclass(frozen=True)
class NetworkConfig:
    levels: int = 5          # number of down/upsampling layers
    top_factor: int = 2      # resampling factor at the top level
    deep_factor: int = 4     # resampling factor at all deeper levels
    base_channels: int = 8
    input_channels: int = 3

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.top_factor < 2 or self.deep_factor < 2:
            raise ValueError("resampling factors must be >= 2")
        if self.base_channels < 1 or self.input_channels < 1:
            raise ValueError("channel counts must be >= 1")

    @property
    def factors(self):
        return (self.top_factor,) + (self.deep_factor,) * (self.levels - 1)


def total_downsampling(cfg: NetworkConfig) -> int:
    """Product of all encoder resampling factors; input dims must be a
    multiple of this."""
    return cfg.top_factor * cfg.deep_factor ** (cfg.levels - 1)


def _channel_plan(cfg):
    # double per level, capped so deep levels stay desk-scale
    return [min(cfg.base_channels * 2**i, cfg.base_channels * 8)
            for i in range(cfg.levels + 1)]


def init_weights(cfg: NetworkConfig, seed: int) -> dict:
    """He-initialized parameter dict keyed by layer name, drawn in a fixed
    order from a PCG64 stream so the network is a pure function of seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    params = {}

    def conv(name, c_in, c_out, ksize=3):
        std = np.sqrt(2.0 / (c_in * ksize * ksize))
        params[name + ".w"] = rng.normal(0.0, std, (c_out, c_in, ksize, ksize))
        params[name + ".b"] = np.zeros(c_out)

    ch = _channel_plan(cfg)
    conv("enc0", cfg.input_channels, ch[0])
    for lvl in range(1, cfg.levels + 1):
        conv(f"enc{lvl}", ch[lvl - 1], ch[lvl])
    head_channels = {"tissue": 1, "pen": 1, "dist": 2}
    for dec in ("tissue", "pen", "dist"):
        for lvl in range(cfg.levels, 0, -1):
            conv(f"{dec}.up{lvl}", ch[lvl], ch[lvl - 1])
            conv(f"{dec}.merge{lvl}", 2 * ch[lvl - 1], ch[lvl - 1])
        conv(f"{dec}.head", ch[0], head_channels[dec], ksize=1)
    return params


def save_weights(path, params: dict):
    """Persist a parameter dict as named arrays in an NPZ container."""
    np.savez(path, **params)


def load_weights(path) -> dict:
    with np.load(path) as data:
        return {name: data[name] for name in data.files}


def _conv(x, w, b):
    """Convolution with zero padding; x is (C, H, W), w is (Cout, Cin, k, k)."""
    c_out, c_in, k, _ = w.shape
    if k == 1:
        out = np.tensordot(w[:, :, 0, 0], x, axes=(1, 0))
    else:
        pad = k // 2
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
        windows = sliding_window_view(xp, (k, k), axis=(1, 2))
        h, wd = x.shape[1:]
        cols = windows.transpose(0, 3, 4, 1, 2).reshape(c_in * k * k, h * wd)
        out = (w.reshape(c_out, c_in * k * k) @ cols).reshape(c_out, h, wd)
    return out + b[:, None, None]


def _relu(x):
    return np.maximum(x, 0.0)


def _downsample(x, f):
    c, h, w = x.shape
    return x.reshape(c, h // f, f, w // f, f).mean(axis=(2, 4))


def _upsample(x, f):
    return np.repeat(np.repeat(x, f, axis=1), f, axis=2)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def forward(image, cfg: NetworkConfig = NetworkConfig(), seed: int = 0,
            params: dict = None, return_raw: bool = False):
    """Run the network on a (C, H, W) image.

    H and W must be multiples of total_downsampling(cfg); pad the input
    with pad_to_multiple first if they are not. Returns a PredictionBundle;
    with return_raw=True also returns the unmasked distance heads as
    (raw_h, raw_v).
    """
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != cfg.input_channels:
        raise DimensionError(
            f"expected ({cfg.input_channels}, H, W) input, got shape {x.shape}"
        )
    d = total_downsampling(cfg)
    h, w = x.shape[1:]
    if h % d or w % d:
        raise DimensionError(
            f"input dims {h}x{w} are not multiples of {d}; "
            f"apply pad_to_multiple(image, {d}) first"
        )
    if params is None:
        params = init_weights(cfg, seed)

    skips = []
    feat = _relu(_conv(x, params["enc0.w"], params["enc0.b"]))
    for lvl, f in enumerate(cfg.factors, start=1):
        skips.append(feat)
        feat = _downsample(feat, f)
        feat = _relu(_conv(feat, params[f"enc{lvl}.w"], params[f"enc{lvl}.b"]))

    def decode(name):
        y = feat
        for lvl in range(cfg.levels, 0, -1):
            f = cfg.factors[lvl - 1]
            y = _upsample(y, f)
            y = _relu(_conv(y, params[f"{name}.up{lvl}.w"], params[f"{name}.up{lvl}.b"]))
            y = np.concatenate([y, skips[lvl - 1]], axis=0)
            y = _relu(_conv(y, params[f"{name}.merge{lvl}.w"],
                            params[f"{name}.merge{lvl}.b"]))
        return _conv(y, params[f"{name}.head.w"], params[f"{name}.head.b"])

    tissue_prob = _sigmoid(decode("tissue"))[0]
    pen_prob = _sigmoid(decode("pen"))[0]
    raw = decode("dist")
    raw_h, raw_v = raw[0], raw[1]
    bundle = PredictionBundle(
        tissue_prob=tissue_prob,
        pen_prob=pen_prob,
        h_dist=raw_h * tissue_prob,
        v_dist=raw_v * tissue_prob,
    )
    if return_raw:
        return bundle, (raw_h, raw_v)
    return bundle
