import math
import shutil

import numpy as np
import pytest

from conftest import box_cloud
from core.dataset import (
    PressDatasetManager,
    compare_runs,
    format_summary,
    resolve_objects,
    sample_name,
)
from core.errors import ManifestMismatch
from core.geometry import write_point_cloud
from data.storage import RunStorage, read_csv, read_depth, read_image


@pytest.fixture
def cloud_file(tmp_path):
    return write_point_cloud(tmp_path / "objects" / "box.xyz",
                             box_cloud((0.0, 0.0, 2e-4), (3e-4, 3e-4, 2e-4), 200, seed=11))


@pytest.fixture
def dataset(small_scene, cloud_file, tmp_path):
    manager = PressDatasetManager(small_scene, output_dir=tmp_path / "run_a")
    run_dir = manager.run_press_dataset([str(cloud_file)])
    return manager, run_dir


class TestPressDataset:
    def test_manifest_rows(self, dataset):
        _, run_dir = dataset
        rows = read_csv(run_dir / "manifest.csv")
        assert [(r["object"], r["position_id"], r["depth_index"]) for r in rows] == [("box", "0", "0"), ("box", "0", "1")]
        assert [r["contact"] for r in rows] == ["false", "true"]
        assert rows[0]["particle_count"] == "60"
        assert float(rows[1]["depth"]) == pytest.approx(1e-4)
        assert (run_dir / "scene.json").exists()
        for row in rows:
            assert (run_dir / row["image"]).exists()
            assert (run_dir / row["depth_map"]).exists()

    def test_depth_zero_is_flat(self, dataset):
        _, run_dir = dataset
        rows = read_csv(run_dir / "manifest.csv")
        image = read_image(run_dir / rows[0]["image"])
        assert image.shape == (480, 640, 3)
        assert np.all(image == image[0, 0])
        assert abs(float(rows[0]["max_depth"])) < 1e-12

    def test_pressed_sample_has_contact(self, dataset):
        _, run_dir = dataset
        rows = read_csv(run_dir / "manifest.csv")
        depth = read_depth(run_dir / rows[1]["depth_map"])
        assert depth.values.shape == (480, 640)
        assert 0.0 < depth.max_depth < 1.5e-4
        col, row = depth.contact_centroid()
        assert abs(col - 319.5) < 12 and abs(row - 239.5) < 12
        image = read_image(run_dir / rows[1]["image"])
        assert not np.all(image == image[0, 0])

    def test_resume_skips_finished_sequences(self, dataset, cloud_file):
        manager, run_dir = dataset
        assert manager.plan_jobs([str(cloud_file)]) == []
        assert len(manager.plan_jobs([str(cloud_file)], resume=False)) == 1
        manager.run_press_dataset([str(cloud_file)])
        assert len(read_csv(run_dir / "manifest.csv")) == 2

    def test_resume_reruns_sequence_with_missing_file(self, dataset, cloud_file):
        manager, run_dir = dataset
        rows = read_csv(run_dir / "manifest.csv")
        (run_dir / rows[1]["image"]).unlink()
        assert len(manager.plan_jobs([str(cloud_file)])) == 1
        manager.run_press_dataset([str(cloud_file)])
        assert (run_dir / rows[1]["image"]).exists()

    def test_deterministic_rerun_is_identical(self, dataset, small_scene, cloud_file, tmp_path):
        _, run_a = dataset
        run_b = PressDatasetManager(small_scene, output_dir=tmp_path / "run_b").run_press_dataset([str(cloud_file)])
        for row in read_csv(run_a / "manifest.csv"):
            assert (run_a / row["image"]).read_bytes() == (run_b / row["image"]).read_bytes()
            assert (run_a / row["depth_map"]).read_bytes() == (run_b / row["depth_map"]).read_bytes()

    def test_positions_shift_contact(self, small_scene, cloud_file, tmp_path):
        scene = small_scene.with_overrides({"press": {"grid_shape": [2, 1], "step": 1e-3}})
        run_dir = PressDatasetManager(scene, output_dir=tmp_path / "two").run_press_dataset([str(cloud_file)], workers=2)
        rows = [r for r in read_csv(run_dir / "manifest.csv") if r["depth_index"] == "1"]
        assert [r["position_id"] for r in rows] == ["0", "1"]
        left, right = (read_depth(run_dir / r["depth_map"]).contact_centroid() for r in rows)
        pixel = scene.render.pixel_size
        assert right[0] - left[0] == pytest.approx(1e-3 / pixel, abs=4.0)
        assert abs(right[1] - left[1]) < 4.0

    def test_every_position_and_depth_is_covered(self, small_scene, cloud_file, tmp_path):
        depths = [1e-5 * k for k in range(11)]
        scene = small_scene.with_overrides({"press": {"grid_shape": [3, 3], "step": 5e-4, "depths": depths}})
        run_dir = PressDatasetManager(scene, output_dir=tmp_path / "grid").run_press_dataset([str(cloud_file)], workers=2)
        rows = read_csv(run_dir / "manifest.csv")
        assert len(rows) == 1 * 9 * 11
        keys = {(r["object"], int(r["position_id"]), int(r["depth_index"])) for r in rows}
        assert keys == {("box", p, d) for p in range(9) for d in range(11)}
        assert all((run_dir / r["image"]).exists() for r in rows)


class TestCompare:
    def test_self_comparison(self, dataset):
        _, run_dir = dataset
        pairs, summary = compare_runs(run_dir, run_dir)
        assert len(pairs) == 2
        assert summary["ssim"] == {"mean": 1.0, "std": 0.0}
        assert summary["mae"] == {"mean": 0.0, "std": 0.0}
        assert summary["psnr"]["mean"] == math.inf
        assert summary["psnr"]["identical"] == 2
        text = format_summary(summary)
        assert text["ssim"] == "1.000 ± 0.000"
        assert text["mae"] == "0.00 ± 0.00%"
        assert text["psnr"] == "inf ± 0.00 (2 identical)"
        rows = read_csv(run_dir / "compare.csv")
        assert [r["object"] for r in rows] == ["box", "box", "mean", "std"]

    def test_manifest_mismatch(self, dataset, tmp_path):
        _, run_dir = dataset
        other = tmp_path / "copy"
        shutil.copytree(run_dir, other)
        storage = RunStorage(other)
        storage.write_manifest(storage.read_manifest()[:1])
        with pytest.raises(ManifestMismatch) as info:
            compare_runs(run_dir, other, output=tmp_path / "cmp.csv")
        assert info.value.missing_in_b == ["box:0:1"]
        assert info.value.missing_in_a == []

    def test_different_density_has_error(self, small_scene, cloud_file, tmp_path):
        manager = PressDatasetManager(small_scene, output_dir=tmp_path / "density")
        result = manager.run_density_variants(str(cloud_file), counts=[200, 20])
        assert set(result) == {20, 200}
        assert result[200] == 0.0
        assert result[20] >= 0.0
        assert (tmp_path / "density" / "n20" / "manifest.csv").exists()
        assert (tmp_path / "density" / "n200" / "compare.csv").exists()

        pairs, summary = compare_runs(tmp_path / "density" / "n20", tmp_path / "density" / "n200")
        assert [p["psnr"] == math.inf for p in pairs] == [True, False]
        assert summary["psnr"]["identical"] == 1
        assert math.isfinite(summary["psnr"]["mean"])
        assert format_summary(summary)["psnr"].endswith("(1 identical)")


class TestObjects:
    def test_resolve_names_and_files(self, small_scene, cloud_file):
        assert resolve_objects(["sphere", str(cloud_file)], small_scene) == [("sphere", None), ("box", str(cloud_file))]

    def test_falls_back_to_scene_objects(self, small_scene):
        scene = small_scene.with_overrides({"objects": ["cone"]})
        assert resolve_objects(None, scene) == [("cone", None)]

    def test_unknown_entry(self, small_scene):
        with pytest.raises(FileNotFoundError):
            resolve_objects(["teapot"], small_scene)

    def test_no_objects(self, small_scene):
        with pytest.raises(ValueError):
            resolve_objects([], small_scene)

    def test_duplicate_names(self, small_scene):
        with pytest.raises(ValueError):
            resolve_objects(["sphere", "sphere"], small_scene)


def test_sample_name():
    assert sample_name("sphere", 4, 7) == "sphere_p4_d07"
