import numpy as np
import pytest

from tissuesep.core import DimensionError, PredictionBundle, coordinate_maps
from tissuesep.postprocess import (
    CentroidMap,
    Histogram2D,
    PostProcessConfig,
    assign_instances,
    build_centroid_map,
    build_histogram,
    find_centroids,
    separate,
    smooth_histogram,
)
from tissuesep.synth import NoiseParams, SceneParams, corrupt, generate_scene

from oracles import (
    brute_force_assign,
    dense_gaussian_smooth,
    dense_nms_peaks,
    labels_match_up_to_permutation,
)


def random_centroid_map(rng, h=40, w=50, fg_frac=0.4):
    mask = rng.random((h, w)) < fg_frac
    cx = rng.uniform(-10, w + 10, (h, w)) * mask
    cy = rng.uniform(-10, h + 10, (h, w)) * mask
    return CentroidMap(cx=cx, cy=cy, mask=mask)


class TestBuildCentroidMap:
    def test_zero_distances_give_coordinates(self):
        h, w = 6, 9
        cmap = build_centroid_map(np.ones((h, w), bool),
                                  np.zeros((h, w)), np.zeros((h, w)))
        hmap, vmap = coordinate_maps(h, w)
        np.testing.assert_array_equal(cmap.cx, hmap)
        np.testing.assert_array_equal(cmap.cy, vmap)

    def test_empty_mask_zeroes_everything(self):
        cmap = build_centroid_map(np.zeros((4, 4), bool),
                                  np.ones((4, 4)), np.ones((4, 4)))
        assert not cmap.cx.any() and not cmap.cy.any()

    def test_ground_truth_distances_cancel(self):
        hmap, vmap = coordinate_maps(5, 5)
        cmap = build_centroid_map(np.ones((5, 5), bool), hmap - 2, vmap - 2)
        np.testing.assert_array_equal(cmap.cx, np.full((5, 5), 2.0))
        np.testing.assert_array_equal(cmap.cy, np.full((5, 5), 2.0))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            build_centroid_map(np.ones((4, 4), bool), np.zeros((4, 5)),
                               np.zeros((4, 4)))


class TestBuildHistogram:
    def test_single_pixel_bin_index(self):
        mask = np.zeros((100, 100), bool)
        mask[10, 10] = True
        cmap = CentroidMap(cx=np.where(mask, 45.0, 0.0),
                           cy=np.where(mask, 67.0, 0.0), mask=mask)
        hist = build_histogram(cmap, 20)
        assert hist.counts[3, 2] == 1
        assert hist.counts.sum() == 1

    def test_all_pixels_same_centroid_single_bin(self):
        mask = np.ones((30, 30), bool)
        cmap = CentroidMap(cx=np.full((30, 30), 12.0),
                           cy=np.full((30, 30), 7.0), mask=mask)
        hist = build_histogram(cmap, 20)
        assert hist.counts[0, 0] == 900
        assert (hist.counts > 0).sum() == 1

    def test_mass_conservation_random(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            cmap = random_centroid_map(rng, 40, 40)
            hist = build_histogram(cmap, 20)
            assert hist.counts.sum() == cmap.mask.sum()

    def test_ceiling_division_shape(self):
        cmap = CentroidMap(cx=np.zeros((45, 61)), cy=np.zeros((45, 61)),
                           mask=np.zeros((45, 61), bool))
        hist = build_histogram(cmap, 20)
        assert (hist.bin_h, hist.bin_w) == (3, 4)

    def test_out_of_bounds_predictions_clamped(self):
        mask = np.ones((20, 20), bool)
        cmap = CentroidMap(cx=np.full((20, 20), -50.0),
                           cy=np.full((20, 20), 500.0), mask=mask)
        hist = build_histogram(cmap, 20)
        assert hist.counts.sum() == 400
        assert hist.counts[0, 0] == 400  # clamped to (y=19, x=0) -> bin (0, 0)


class TestSmoothHistogram:
    def test_sigma_zero_identity(self):
        rng = np.random.default_rng(3)
        hist = Histogram2D(counts=rng.random((9, 9)), k=20, source_shape=(180, 180))
        out = smooth_histogram(hist, 0.0)
        np.testing.assert_array_equal(out.counts, hist.counts)

    def test_impulse_matches_sampled_gaussian(self):
        counts = np.zeros((21, 21))
        counts[10, 10] = 1.0
        hist = Histogram2D(counts=counts, k=20, source_shape=(420, 420))
        out = smooth_histogram(hist, 2.0)
        expected = dense_gaussian_smooth(counts, 2.0)
        np.testing.assert_allclose(out.counts, expected, atol=1e-12)
        assert out.counts[10, 10] == out.counts.max()

    def test_matches_dense_convolution_oracle(self):
        rng = np.random.default_rng(11)
        for sigma in (0.7, 1.5, 2.0):
            counts = rng.random((17, 23)) * 10
            hist = Histogram2D(counts=counts, k=20, source_shape=(340, 460))
            out = smooth_histogram(hist, sigma)
            np.testing.assert_allclose(
                out.counts, dense_gaussian_smooth(counts, sigma), atol=1e-9)

    def test_mass_never_increases(self):
        rng = np.random.default_rng(13)
        counts = rng.random((15, 15))
        hist = Histogram2D(counts=counts, k=20, source_shape=(300, 300))
        out = smooth_histogram(hist, 2.0)
        assert out.counts.sum() <= counts.sum() + 1e-12

    def test_mass_preserved_when_support_far_from_border(self):
        counts = np.zeros((25, 25))
        counts[12, 12] = 5.0  # radius ceil(4*1) = 4 from all borders
        hist = Histogram2D(counts=counts, k=20, source_shape=(500, 500))
        out = smooth_histogram(hist, 1.0)
        np.testing.assert_allclose(out.counts.sum(), 5.0, rtol=1e-12)


class TestFindCentroids:
    def test_single_nonzero_bin(self):
        counts = np.zeros((10, 10))
        counts[4, 6] = 3.0
        hist = Histogram2D(counts=counts, k=20, source_shape=(200, 200))
        cents = find_centroids(hist, 15, 98.0)
        np.testing.assert_allclose(cents, [[6.5 * 20 - 0.5, 4.5 * 20 - 0.5]])

    def test_two_far_impulses_survive(self):
        counts = np.zeros((40, 40))
        counts[10, 10] = 5.0
        counts[10, 30] = 5.0  # 20 bins apart, window 15
        hist = Histogram2D(counts=counts, k=20, source_shape=(800, 800))
        smoothed = smooth_histogram(hist, 2.0)
        cents = find_centroids(smoothed, 15, 98.0)
        assert len(cents) == 2

    def test_two_close_impulses_merge(self):
        counts = np.zeros((40, 40))
        counts[10, 10] = 5.0
        counts[10, 14] = 5.0  # 4 bins apart, window 15
        hist = Histogram2D(counts=counts, k=20, source_shape=(800, 800))
        smoothed = smooth_histogram(hist, 2.0)
        cents = find_centroids(smoothed, 15, 98.0)
        assert len(cents) == 1

    def test_all_zero_returns_empty(self):
        hist = Histogram2D(counts=np.zeros((8, 8)), k=20, source_shape=(160, 160))
        assert len(find_centroids(hist, 15, 98.0)) == 0

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_dense_nms_oracle(self, seed):
        rng = np.random.default_rng(seed)
        # quantized values so plateaus actually occur
        counts = np.floor(rng.random((20, 24)) * 6)
        hist = Histogram2D(counts=counts, k=10, source_shape=(200, 240))
        for s, pct in ((3, 50.0), (5, 80.0), (7, 98.0)):
            got = find_centroids(hist, s, pct)
            expected = sorted(
                (min(max((c + 0.5) * 10 - 0.5, 0.0), 239.0),
                 min(max((r + 0.5) * 10 - 0.5, 0.0), 199.0))
                for r, c in dense_nms_peaks(counts, s, pct)
            )
            expected = sorted(set(expected), key=lambda p: (p[1], p[0]))
            assert len(got) == len(expected)
            for (gx, gy), (ex, ey) in zip(got, expected):
                assert gx == ex and gy == ey


class TestAssignInstances:
    def test_nearest_wins(self):
        mask = np.zeros((40, 40), bool)
        mask[10, 19] = True
        cmap = CentroidMap(cx=np.where(mask, 19.0, 0.0),
                           cy=np.where(mask, 10.0, 0.0), mask=mask)
        labels = assign_instances(cmap, np.array([[10.0, 10.0], [30.0, 10.0]]))
        assert labels[10, 19] == 1

    def test_tie_breaks_to_lowest_index(self):
        mask = np.zeros((40, 40), bool)
        mask[10, 20] = True
        cmap = CentroidMap(cx=np.where(mask, 20.0, 0.0),
                           cy=np.where(mask, 10.0, 0.0), mask=mask)
        labels = assign_instances(cmap, np.array([[10.0, 10.0], [30.0, 10.0]]))
        assert labels[10, 20] == 1

    def test_empty_centroids_rejected(self):
        cmap = CentroidMap(cx=np.zeros((4, 4)), cy=np.zeros((4, 4)),
                           mask=np.ones((4, 4), bool))
        with pytest.raises(ValueError):
            assign_instances(cmap, np.zeros((0, 2)))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(100 + seed)
        cmap = random_centroid_map(rng, 20, 25)
        centroids = rng.uniform(0, 20, (3, 2))
        got = assign_instances(cmap, centroids)
        expected = brute_force_assign(cmap.cx, cmap.cy, cmap.mask, centroids)
        np.testing.assert_array_equal(got, expected)


class TestSeparate:
    def test_empty_tissue(self):
        zero = np.zeros((64, 64))
        bundle = PredictionBundle(zero, zero, zero, zero)
        tissue, pen, labels, cents = separate(bundle)
        assert not tissue.any() and not pen.any()
        assert labels.max() == 0
        assert len(cents) == 0

    def test_single_blob_exact_maps(self):
        scene = generate_scene(SceneParams(n_sections=1, seed=5,
                                           size_range=(25, 40)))
        bundle = corrupt(scene, NoiseParams())
        cfg = PostProcessConfig(k=8, sigma=2.0, s=9, t_percentile=98.0)
        tissue, _, labels, cents = separate(bundle, cfg)
        assert len(cents) == 1
        assert labels.max() == 1
        np.testing.assert_array_equal(labels > 0, scene.tissue)

    def test_two_adjacent_blobs_separated(self):
        cfg = PostProcessConfig(k=8, sigma=2.0, s=9, t_percentile=98.0)
        scene = generate_scene(SceneParams(
            n_sections=2, adjacency_prob=1.0, seed=21, size_range=(30, 45),
            min_centroid_separation=cfg.s * cfg.k + 5))
        bundle = corrupt(scene, NoiseParams())
        _, _, labels, cents = separate(bundle, cfg)
        assert len(cents) == 2
        assert labels_match_up_to_permutation(labels, scene.gt_instances)

    def test_fragments_rejoined(self):
        cfg = PostProcessConfig(k=8, sigma=2.0, s=9, t_percentile=98.0)
        scene = generate_scene(SceneParams(
            n_sections=2, fragmentation_prob=1.0, seed=33, size_range=(25, 40),
            min_centroid_separation=cfg.s * cfg.k + 5))
        bundle = corrupt(scene, NoiseParams())
        _, _, labels, _ = separate(bundle, cfg)
        assert labels_match_up_to_permutation(labels, scene.gt_instances)

    def test_fallback_single_centroid(self):
        # uniform tissue with scattered centroid predictions: the 98th
        # percentile can exceed every local max, so NMS returns nothing and
        # the global-max bin must be used instead
        rng = np.random.default_rng(9)
        h = w = 64
        tissue = np.ones((h, w))
        hmap = np.arange(w, dtype=float)[None, :].repeat(h, axis=0)
        vmap = np.arange(h, dtype=float)[:, None].repeat(w, axis=1)
        cx = rng.uniform(0, w, (h, w))
        cy = rng.uniform(0, h, (h, w))
        bundle = PredictionBundle(tissue, np.zeros((h, w)), hmap - cx, vmap - cy)
        cfg = PostProcessConfig(k=4, sigma=0.0, s=3, t_percentile=100.0)
        _, _, labels, cents = separate(bundle, cfg)
        assert len(cents) == 1
        assert (labels[tissue.astype(bool)] == 1).all()

    def test_determinism(self):
        scene = generate_scene(SceneParams(n_sections=3, seed=77))
        bundle = corrupt(scene, NoiseParams(dist_noise_sigma=1.0, seed=1))
        cfg = PostProcessConfig(k=8, sigma=2.0, s=9)
        first = separate(bundle, cfg)
        second = separate(bundle, cfg)
        np.testing.assert_array_equal(first[2], second[2])
        np.testing.assert_array_equal(first[3], second[3])

    def test_label_contiguity(self):
        scene = generate_scene(SceneParams(n_sections=4, seed=13,
                                           fragmentation_prob=0.5))
        bundle = corrupt(scene, NoiseParams(dist_noise_sigma=3.0, seed=2))
        _, _, labels, cents = separate(
            bundle, PostProcessConfig(k=8, sigma=2.0, s=9))
        used = np.unique(labels[labels > 0])
        assert list(used) == list(range(1, len(cents) + 1))

    def test_translation_equivariance(self):
        cfg = PostProcessConfig(k=8, sigma=2.0, s=9, t_percentile=98.0)
        scene = generate_scene(SceneParams(height=256, width=256, n_sections=2,
                                           seed=3, size_range=(18, 26),
                                           min_centroid_separation=77))
        bundle = corrupt(scene, NoiseParams())
        _, _, labels, _ = separate(bundle, cfg)
        # translate everything by exactly (2k, 3k) pixels on a larger canvas
        dy, dx = 2 * cfg.k, 3 * cfg.k
        big = np.zeros((256 + dy + 64, 256 + dx + 64))

        def shift(arr):
            out = np.zeros(big.shape, dtype=arr.dtype)
            out[dy:dy + 256, dx:dx + 256] = arr
            return out

        hmap0, vmap0 = np.meshgrid(np.arange(256.0), np.arange(256.0))
        tissue_s = shift(scene.tissue.astype(float))
        # distances are translation invariant; recompute from shifted labels
        hdist_s = shift(bundle.h_dist)
        vdist_s = shift(bundle.v_dist)
        bundle_s = PredictionBundle(tissue_s, np.zeros(big.shape), hdist_s, vdist_s)
        _, _, labels_s, _ = separate(bundle_s, cfg)
        np.testing.assert_array_equal(labels_s[dy:dy + 256, dx:dx + 256], labels)
        inv = labels_s.copy()
        inv[dy:dy + 256, dx:dx + 256] = 0
        assert not inv.any()
