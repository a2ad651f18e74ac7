import json
import logging

import cv2
import numpy as np
import pytest

from core.renderer import IMAGE_SHAPE, DepthMap, TactileImage
from core.scene_config import SceneConfig
from data.storage import (
    MANIFEST_FIELDS,
    RunStorage,
    atomic_write_text,
    encode_png,
    read_csv,
    read_depth,
    read_image,
    setup_logging,
    write_csv,
    write_depth,
)


def manifest_row(obj, pid, k):
    row = {field: "" for field in MANIFEST_FIELDS}
    row.update({"object": obj, "position_id": str(pid), "depth_index": str(k), "contact": "false"})
    return row


class TestAtomicWrites:
    def test_text_roundtrip(self, tmp_path):
        path = atomic_write_text(tmp_path / "nested" / "note.txt", "한글 ok")
        assert path.read_text(encoding="utf-8") == "한글 ok"
        assert not (tmp_path / "nested" / "note.txt.tmp").exists()

    def test_csv_roundtrip(self, tmp_path):
        rows = [{"a": "1", "b": "x"}, {"a": "2", "b": "y,z"}]
        write_csv(tmp_path / "t.csv", ["a", "b"], rows)
        assert read_csv(tmp_path / "t.csv") == rows


class TestImagesAndDepth:
    def test_png_roundtrip_keeps_rgb_order(self, tmp_path):
        pixels = np.zeros(IMAGE_SHAPE + (3,), dtype=np.uint8)
        pixels[..., 0] = 200
        pixels[10, 20] = (1, 2, 3)
        storage = RunStorage(tmp_path).ensure_directories()
        path = storage.save_image("sample", TactileImage(pixels=pixels))
        assert path.suffix == ".png"
        np.testing.assert_array_equal(read_image(path), pixels)

    def test_encoded_png_holds_the_bgr_view(self):
        pixels = np.zeros(IMAGE_SHAPE + (3,), dtype=np.uint8)
        pixels[..., 0] = 200
        image = TactileImage(pixels=pixels)
        decoded = cv2.imdecode(np.frombuffer(encode_png(image), dtype=np.uint8), cv2.IMREAD_COLOR)
        np.testing.assert_array_equal(decoded, image.bgr())

    def test_missing_image(self, tmp_path):
        with pytest.raises(OSError):
            read_image(tmp_path / "nope.png")

    def test_depth_roundtrip(self, tmp_path):
        values = np.random.default_rng(0).uniform(0, 1e-3, size=(12, 7))
        path = write_depth(tmp_path / "d", DepthMap(values=values, pixel_size=2.5e-5))
        assert path.suffix == ".bin"
        header = json.loads(path.with_suffix(".json").read_text())
        assert (header["height"], header["width"]) == (12, 7)
        assert path.stat().st_size == 12 * 7 * 4
        loaded = read_depth(path)
        np.testing.assert_allclose(loaded.values, values.astype(np.float32))
        assert loaded.pixel_size == 2.5e-5

    def test_truncated_depth(self, tmp_path):
        path = write_depth(tmp_path / "d", DepthMap(values=np.zeros((4, 4)), pixel_size=1e-5))
        path.write_bytes(b"\0" * 8)
        with pytest.raises(ValueError):
            read_depth(path)


class TestRunStorage:
    def test_layout(self, tmp_path):
        storage = RunStorage(tmp_path / "run").ensure_directories()
        assert storage.images_dir.is_dir()
        assert storage.depth_dir.is_dir()
        assert storage.relative(storage.images_dir / "a.png") == "images/a.png"

    def test_config_snapshot(self, tmp_path):
        storage = RunStorage(tmp_path).ensure_directories()
        scene = SceneConfig.desk()
        assert storage.save_config(scene) == storage.config_file
        assert SceneConfig.load(storage.config_file).to_dict() == scene.to_dict()

    def test_manifest_sorted_and_merged(self, tmp_path):
        storage = RunStorage(tmp_path).ensure_directories()
        assert storage.read_manifest() == []
        storage.write_manifest([manifest_row("b", 0, 0), manifest_row("a", 1, 0), manifest_row("a", 0, 10),
                                manifest_row("a", 0, 2)])
        keys = [(r["object"], r["position_id"], r["depth_index"]) for r in storage.read_manifest()]
        assert keys == [("a", "0", "2"), ("a", "0", "10"), ("a", "1", "0"), ("b", "0", "0")]

        replacement = manifest_row("a", 1, 0)
        replacement["contact"] = "true"
        storage.merge_manifest([replacement, manifest_row("c", 0, 0)])
        rows = storage.read_manifest()
        assert len(rows) == 5
        assert [r["contact"] for r in rows if r["object"] == "a" and r["position_id"] == "1"] == ["true"]

    def test_step_log(self, tmp_path):
        storage = RunStorage(tmp_path).ensure_directories()
        storage.start_step_log()
        storage.append_step_log({"step": 0, "status": "ok"})
        storage.append_step_log({"step": 1, "status": "ok"})
        lines = storage.step_log_file.read_text(encoding="utf-8").splitlines()
        assert [json.loads(line)["step"] for line in lines] == [0, 1]
        storage.start_step_log()
        assert storage.step_log_file.read_text(encoding="utf-8") == ""


def test_setup_logging_writes_file(tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    setup_logging(log_file, "DEBUG")
    logging.getLogger("gelmpm.test").debug("hello file")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "hello file" in log_file.read_text(encoding="utf-8")
    setup_logging()
