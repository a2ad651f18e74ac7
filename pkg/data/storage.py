"""
Run storage for the GelMPM simulator
- Run directories with images, depth maps, manifest and step log
- 원자적 쓰기 (.tmp 파일 후 rename)
- 향상된 오류 처리 및 로깅
"""

import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import cv2
import numpy as np

from config import (
    CONFIG_SNAPSHOT_FILE,
    LOGGING_SETTINGS,
    MANIFEST_FILE,
    STEP_LOG_FILE,
)
from core.renderer import DepthMap

logger = logging.getLogger(__name__)

MANIFEST_FIELDS = [
    "object",
    "position_id",
    "x",
    "y",
    "depth_index",
    "depth",
    "max_depth",
    "particle_count",
    "contact",
    "image",
    "depth_map",
]


# 로깅 설정
def setup_logging(log_file=None, level=None):
    """
    Configure root logging once

    Messages go to stderr (stdout carries the stdio bridge protocol) and, when
    given, to a UTF-8 log file.
    """
    handlers = [logging.StreamHandler(sys.stderr)]
    try:
        if log_file is not None:
            Path(log_file).parent.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    except OSError as e:
        print(f"Warning: Could not open log file {log_file}: {e}", file=sys.stderr)

    logging.basicConfig(
        level=level or LOGGING_SETTINGS["level"],
        format=LOGGING_SETTINGS["format"],
        handlers=handlers,
        force=True,
    )


def atomic_write_bytes(path, payload):
    """Write to a .tmp sibling, then rename over the target"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_name(path.name + ".tmp")
    try:
        with open(temp_file, "wb") as f:
            f.write(payload)
        os.replace(temp_file, path)
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        # 임시 파일 정리
        if temp_file.exists():
            try:
                temp_file.unlink()
            except OSError:
                pass
        raise
    return path


def atomic_write_text(path, text):
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(path, fieldnames, rows):
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return atomic_write_text(path, buffer.getvalue())


def read_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def read_image(path):
    """PNG as an RGB uint8 array"""
    pixels = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if pixels is None:
        logger.error(f"Could not read image {path}")
        raise OSError(f"Could not read image {path}")
    return cv2.cvtColor(pixels, cv2.COLOR_BGR2RGB)


def encode_png(image):
    """PNG bytes of a TactileImage"""
    ok, buffer = cv2.imencode(".png", image.bgr())
    if not ok:
        raise OSError("PNG encoding failed")
    return buffer.tobytes()


def write_depth(path, depth):
    """<name>.bin (float32, row-major) plus <name>.json header"""
    path = Path(path).with_suffix(".bin")
    atomic_write_bytes(path, depth.values.astype("<f4").tobytes(order="C"))
    header = {
        "width": depth.width,
        "height": depth.height,
        "pixel_size": depth.pixel_size,
        "dtype": "float32",
        "byte_order": "little",
        "units": "m",
    }
    atomic_write_text(path.with_suffix(".json"), json.dumps(header, indent=2))
    return path


def read_depth(path):
    path = Path(path).with_suffix(".bin")
    with open(path.with_suffix(".json"), "r", encoding="utf-8") as f:
        header = json.load(f)
    values = np.fromfile(path, dtype="<f4")
    expected = header["width"] * header["height"]
    if values.size != expected:
        raise ValueError(f"{path}: expected {expected} values, found {values.size}")
    return DepthMap(values=values.reshape(header["height"], header["width"]).astype(np.float64),
                    pixel_size=float(header["pixel_size"]))


def manifest_key(row):
    return (row["object"], int(row["position_id"]), int(row["depth_index"]))


class RunStorage:
    """Files of one run (dataset, bridge session or density variant)"""

    def __init__(self, run_dir):
        self.run_dir = Path(run_dir)
        self.images_dir = self.run_dir / "images"
        self.depth_dir = self.run_dir / "depth"
        self.manifest_file = self.run_dir / MANIFEST_FILE
        self.step_log_file = self.run_dir / STEP_LOG_FILE
        self.config_file = self.run_dir / CONFIG_SNAPSHOT_FILE

    def ensure_directories(self):
        """필요한 디렉토리들이 존재하는지 확인하고 생성"""
        for directory in (self.run_dir, self.images_dir, self.depth_dir):
            try:
                directory.mkdir(parents=True, exist_ok=True)
                logger.debug(f"Directory ensured: {directory}")
            except OSError as e:
                logger.error(f"Failed to create directory {directory}: {e}")
                raise
        return self

    def save_config(self, scene):
        atomic_write_text(self.config_file, scene.to_json())
        return self.config_file

    def save_image(self, name, image):
        path = self.images_dir / f"{name}.png"
        atomic_write_bytes(path, encode_png(image))
        return path

    def save_depth(self, name, depth):
        return write_depth(self.depth_dir / f"{name}.bin", depth)

    def relative(self, path):
        return Path(path).relative_to(self.run_dir).as_posix()

    def read_manifest(self):
        if not self.manifest_file.exists():
            return []
        return read_csv(self.manifest_file)

    def write_manifest(self, rows):
        """Rewrite the manifest sorted by (object, position, depth index)"""
        rows = sorted(rows, key=manifest_key)
        write_csv(self.manifest_file, MANIFEST_FIELDS, rows)
        logger.debug(f"Manifest written: {len(rows)} rows")
        return self.manifest_file

    def merge_manifest(self, new_rows):
        """Replace rows with matching keys, keep the rest"""
        merged = {manifest_key(row): row for row in self.read_manifest()}
        for row in new_rows:
            merged[manifest_key(row)] = row
        return self.write_manifest(list(merged.values()))

    def append_step_log(self, record):
        try:
            with open(self.step_log_file, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
        except OSError as e:
            logger.error(f"Error writing step log {self.step_log_file}: {e}")
            raise

    def start_step_log(self):
        """Truncate the step log at the start of a session"""
        atomic_write_text(self.step_log_file, "")
        return self.step_log_file
