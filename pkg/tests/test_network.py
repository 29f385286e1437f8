import numpy as np
import pytest

from tissuesep.core import DimensionError, pad_to_multiple
from tissuesep.network import (
    NetworkConfig,
    forward,
    init_weights,
    load_weights,
    save_weights,
    total_downsampling,
)

SMALL = NetworkConfig(levels=3, top_factor=2, deep_factor=4, base_channels=4)


class TestTotalDownsampling:
    def test_default_is_512(self):
        assert total_downsampling(NetworkConfig()) == 512

    def test_small_config(self):
        assert total_downsampling(NetworkConfig(levels=2, top_factor=2,
                                                deep_factor=4)) == 8

    def test_single_level_rejected(self):
        with pytest.raises(ValueError):
            NetworkConfig(levels=1)


class TestForward:
    def test_output_shapes_match_input(self):
        rng = np.random.default_rng(0)
        d = total_downsampling(SMALL)
        for h, w in ((d, d), (2 * d, d), (d, 3 * d)):
            image = rng.random((3, h, w))
            bundle = forward(image, SMALL, seed=1)
            assert bundle.shape == (h, w)

    def test_default_config_512(self):
        rng = np.random.default_rng(1)
        image = rng.random((3, 512, 512))
        bundle = forward(image, NetworkConfig(base_channels=2), seed=0)
        assert bundle.shape == (512, 512)

    def test_probabilities_in_open_unit_interval(self):
        rng = np.random.default_rng(2)
        image = rng.random((3, 32, 32))
        bundle = forward(image, SMALL, seed=3)
        assert 0.0 < bundle.tissue_prob.min() and bundle.tissue_prob.max() < 1.0
        assert 0.0 < bundle.pen_prob.min() and bundle.pen_prob.max() < 1.0

    def test_distance_heads_are_tissue_scaled(self):
        rng = np.random.default_rng(3)
        image = rng.random((3, 32, 64))
        bundle, (raw_h, raw_v) = forward(image, SMALL, seed=4, return_raw=True)
        np.testing.assert_array_equal(bundle.h_dist, raw_h * bundle.tissue_prob)
        np.testing.assert_array_equal(bundle.v_dist, raw_v * bundle.tissue_prob)
        low = bundle.tissue_prob < 1e-6
        if low.any():
            cap = 1e-6 * max(np.abs(raw_h).max(), np.abs(raw_v).max())
            assert np.abs(bundle.h_dist[low]).max() <= cap

    def test_invalid_size_names_padding(self):
        image = np.zeros((3, 33, 32))
        with pytest.raises(DimensionError, match="pad_to_multiple"):
            forward(image, SMALL, seed=0)

    def test_pad_then_forward_never_raises(self):
        rng = np.random.default_rng(4)
        d = total_downsampling(SMALL)
        for h, w in ((5, 9), (31, 70), (d, d + 1)):
            plane = rng.random((h, w))
            padded, _ = pad_to_multiple(plane, d)
            image = np.stack([padded] * 3)
            bundle = forward(image, SMALL, seed=0)
            assert bundle.shape == padded.shape

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(5)
        image = rng.random((3, 32, 32))
        a = forward(image, SMALL, seed=7)
        b = forward(image, SMALL, seed=7)
        np.testing.assert_array_equal(a.tissue_prob, b.tissue_prob)
        np.testing.assert_array_equal(a.h_dist, b.h_dist)
        c = forward(image, SMALL, seed=8)
        assert not np.array_equal(a.tissue_prob, c.tissue_prob)

    def test_wrong_channel_count_rejected(self):
        with pytest.raises(DimensionError):
            forward(np.zeros((1, 32, 32)), SMALL, seed=0)


class TestWeightIO:
    def test_round_trip(self, tmp_path):
        params = init_weights(SMALL, seed=11)
        path = tmp_path / "weights.npz"
        save_weights(path, params)
        loaded = load_weights(path)
        assert set(loaded) == set(params)
        for name in params:
            np.testing.assert_array_equal(loaded[name], params[name])

    def test_forward_with_external_weights(self, tmp_path):
        rng = np.random.default_rng(6)
        image = rng.random((3, 32, 32))
        params = init_weights(SMALL, seed=12)
        path = tmp_path / "weights.npz"
        save_weights(path, params)
        direct = forward(image, SMALL, seed=12)
        via_file = forward(image, SMALL, params=load_weights(path))
        np.testing.assert_array_equal(direct.tissue_prob, via_file.tissue_prob)
