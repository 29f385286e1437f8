import csv
import json

import numpy as np
import pytest

from tissuesep.cli import main
from tissuesep.harness import (
    GridSpec,
    grid_search,
    load_grid_scenes,
    matched_instance_dice,
)
from tissuesep.postprocess import PostProcessConfig


class TestMatchedInstanceDice:
    def test_identical_maps(self):
        labels = np.zeros((16, 16), dtype=np.int32)
        labels[2:6, 2:6] = 1
        labels[10:14, 10:14] = 2
        assert matched_instance_dice(labels, labels) == 1.0

    def test_permuted_labels(self):
        labels = np.zeros((16, 16), dtype=np.int32)
        labels[2:6, 2:6] = 1
        labels[10:14, 10:14] = 2
        permuted = np.where(labels == 1, 2, np.where(labels == 2, 1, 0))
        assert matched_instance_dice(permuted, labels) == 1.0

    def test_missing_instance_scores_zero(self):
        gt = np.zeros((16, 16), dtype=np.int32)
        gt[2:6, 2:6] = 1
        gt[10:14, 10:14] = 2
        pred = np.where(gt == 1, 1, 0)
        assert matched_instance_dice(pred, gt) == pytest.approx(0.5)

    def test_both_empty(self):
        empty = np.zeros((8, 8), dtype=np.int32)
        assert matched_instance_dice(empty, empty) == 1.0


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("grid_dataset")
    rc = main(["synth", "--n", "6", "--seed", "11", "--sections", "1,3",
               "--size-range", "25,40", "--fragmentation-prob", "0.4",
               "--min-separation", "90", "--out-dir", str(out)])
    assert rc == 0
    return out


class TestGridSearch:
    def test_single_cell_returns_that_config(self, dataset_dir):
        scenes = load_grid_scenes(dataset_dir)
        spec = GridSpec(k_values=(8,), sigma_values=(2.0,), s_values=(9,),
                        t_percentile_values=(98.0,))
        best, rows = grid_search(spec, scenes)
        assert best == PostProcessConfig(k=8, sigma=2.0, s=9, t_percentile=98.0)
        assert len(rows) == 1

    def test_defaults_are_among_argmax_on_zero_noise(self, dataset_dir):
        scenes = load_grid_scenes(dataset_dir)
        spec = GridSpec(k_values=(8, 16), sigma_values=(1.0, 2.0),
                        s_values=(5, 9), t_percentile_values=(90.0, 98.0),
                        objective="count_accuracy")
        best, rows = grid_search(spec, scenes)
        target = next(r for r in rows if r["k"] == 8 and r["sigma"] == 2.0
                      and r["s"] == 9 and r["t_percentile"] == 98.0)
        assert target["count_accuracy"] == max(r["count_accuracy"] for r in rows)
        assert best.k in (8, 16)

    def test_row_count_is_grid_product(self, dataset_dir):
        scenes = load_grid_scenes(dataset_dir)
        spec = GridSpec(k_values=(8, 10), sigma_values=(1.0, 2.0, 3.0),
                        s_values=(5,), t_percentile_values=(95.0, 98.0))
        _, rows = grid_search(spec, scenes)
        assert len(rows) == 2 * 3 * 1 * 2

    def test_even_s_rejected(self):
        with pytest.raises(ValueError):
            GridSpec(k_values=(8,), sigma_values=(2.0,), s_values=(4,),
                     t_percentile_values=(98.0,))

    def test_cli_gridsearch_outputs(self, dataset_dir, tmp_path):
        out = tmp_path / "grid"
        rc = main(["gridsearch", "--dataset-dir", str(dataset_dir),
                   "--out-dir", str(out),
                   "--k-values", "8,16", "--sigma-values", "1,2",
                   "--s-values", "9", "--percentile-values", "95,98"])
        assert rc == 0
        with open(out / "grid_results.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 8
        best = json.loads((out / "best_config.json").read_text())
        assert set(best) == {"k", "sigma", "s", "t_percentile", "objective"}

    def test_cli_empty_dataset_exit_2(self, tmp_path):
        empty = tmp_path / "nothing"
        empty.mkdir()
        rc = main(["gridsearch", "--dataset-dir", str(empty),
                   "--out-dir", str(tmp_path / "out")])
        assert rc == 2
