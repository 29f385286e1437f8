"""Shape tour of the forward-only reference network.

Runs the three-decoder encoder/decoder network on a random RGB tile and
shows the padding helper needed when the input is not a multiple of the
total downsampling factor. The network is untrained — this demo is about
the tensor contract, not segmentation quality.
"""

import numpy as np

from tissuesep import (
    NetworkConfig,
    crop_to,
    forward,
    init_weights,
    pad_to_multiple,
    total_downsampling,
)


def main():
    cfg = NetworkConfig()
    factor = total_downsampling(cfg)
    print(f"levels={cfg.levels} factors={cfg.factors} "
          f"total downsampling={factor}")

    rng = np.random.default_rng(3)
    image = rng.random((3, 700, 900))
    print(f"input tile: {image.shape[1]}x{image.shape[2]} "
          f"(not a multiple of {factor})")

    padded = np.stack([pad_to_multiple(ch, factor)[0] for ch in image])
    orig = image.shape[1:]
    print(f"padded to: {padded.shape[1]}x{padded.shape[2]}")

    params = init_weights(cfg, seed=0)
    bundle = forward(padded, cfg, params=params)
    tissue = crop_to(bundle.tissue_prob, orig)
    h_dist = crop_to(bundle.h_dist, orig)
    _, (raw_h, _raw_v) = forward(padded, cfg, params=params, return_raw=True)

    print(f"tissue head: {tissue.shape}, "
          f"range [{tissue.min():.3f}, {tissue.max():.3f}]")
    print(f"distance head: {h_dist.shape}, "
          f"range [{h_dist.min():.3f}, {h_dist.max():.3f}]")
    scaled = np.allclose(bundle.h_dist, raw_h * bundle.tissue_prob)
    print(f"distance head equals raw output x tissue probability: {scaled}")


if __name__ == "__main__":
    main()
