"""
Configuration constants for the GelMPM tactile simulator
- 사용자 데이터를 플랫폼별 데이터 디렉토리에 저장
- Default scene values for a GelSight-style elastomer
"""

import os
import sys
from pathlib import Path

# Application info
APP_NAME = "GelMPM Tactile Simulator"
APP_FOLDER_NAME = "GelMPM"  # 폴더명
VERSION = "1.0.0"
AUTHOR = "GelMPM developers"
PROTOCOL_VERSION = "gelmpm/1"


# 사용자 데이터 디렉토리 결정 (크로스 플랫폼)
def get_user_data_dir():
    """사용자 데이터 디렉토리 경로를 반환"""
    if sys.platform == "win32":
        # Windows: %APPDATA%\GelMPM
        appdata = os.environ.get("APPDATA")
        if appdata:
            return Path(appdata) / APP_FOLDER_NAME
        else:
            # fallback
            return Path.home() / "AppData" / "Roaming" / APP_FOLDER_NAME
    elif sys.platform == "darwin":
        # macOS: ~/Library/Application Support/GelMPM
        return Path.home() / "Library" / "Application Support" / APP_FOLDER_NAME
    else:
        # Linux: ~/.local/share/GelMPM
        return Path.home() / ".local" / "share" / APP_FOLDER_NAME


# 사용자 데이터 디렉토리 (created lazily by RunStorage)
USER_DATA_DIR = get_user_data_dir()
RUNS_DIR = USER_DATA_DIR / "runs"
OBJECTS_DIR = USER_DATA_DIR / "objects"
LOG_FILE = USER_DATA_DIR / "gelmpm.log"

# File names inside a run directory
MANIFEST_FILE = "manifest.csv"
CONFIG_SNAPSHOT_FILE = "scene.json"
STEP_LOG_FILE = "steps.jsonl"
COMPARE_FILE = "compare.csv"

# Elastomer: 20 x 20 x 4 mm gel, 101 x 101 x 21 lattice
DEFAULT_ELASTOMER = {
    "dims": [0.020, 0.020, 0.004],
    "counts": [101, 101, 21],
    "n_fixed": 2,
}

DEFAULT_MATERIAL = {
    "youngs_modulus": 1.45e5,
    "poisson_ratio": 0.45,
    "density": 1000.0,
}

# 256^3 nodes over a 33 mm edge; origin None = centered on the elastomer
DEFAULT_GRID = {
    "resolution": [256, 256, 256],
    "edge": 0.033,
    "origin": None,
    "floor_margin": 4,
}

DEFAULT_TIME = {
    "dt": 1e-4,
    "n_substeps": 0,
    "cfl": 0.5,
    "gravity": False,
    "damping": 0.0,
}

DEFAULT_INDENTER = {
    "cloud_path": "",
    "target_count": 100000,
    "pose": [0.0, 0.0, 0.0],
    "yaw": 0.0,
    "seed": 0,
    "gap": 1e-4,
}

# 3 x 3 positions, 1 mm apart; 0..1 mm in 0.1 mm steps
DEFAULT_PRESS = {
    "grid_shape": [3, 3],
    "step": 1e-3,
    "depths": [round(0.1e-3 * k, 7) for k in range(11)],
    "speed": 0.02,
    "settle_steps": 20,
}

# Three RGB-tinted lights, 120 degrees apart
DEFAULT_LIGHTS = [
    {"azimuth_deg": 90.0, "elevation_deg": 30.0,
     "diffuse": [0.85, 0.15, 0.15], "specular": [0.4, 0.1, 0.1]},
    {"azimuth_deg": 210.0, "elevation_deg": 30.0,
     "diffuse": [0.15, 0.85, 0.15], "specular": [0.1, 0.4, 0.1]},
    {"azimuth_deg": 330.0, "elevation_deg": 30.0,
     "diffuse": [0.15, 0.15, 0.85], "specular": [0.1, 0.1, 0.4]},
]

DEFAULT_RENDER = {
    "k_a": 0.3,
    "k_d": 0.6,
    "k_s": 0.15,
    "alpha": 20.0,
    "ambient": [0.4, 0.4, 0.4],
    "view": [0.0, 0.0, -1.0],
    "pixel_size": 2.8125e-5,  # 640 px span 18 mm
    "image_shape": [480, 640],
    "background_path": None,
    "lights": DEFAULT_LIGHTS,
}

DEFAULT_ALIGNMENT = {
    "default": {"offset": [0, 0], "scale": 1.0},
    "per_object": {},
}

# Desk-scale scene: 64^3 grid, about 2e4 elastomer particles
DESK_SCALE_OVERRIDES = {
    "elastomer": {"dims": [0.010, 0.010, 0.004], "counts": [41, 41, 13]},
    "grid": {"resolution": [64, 64, 64], "edge": 0.014, "floor_margin": 3},
    "indenter": {"target_count": 10000},
}

DEFAULT_WORKERS = 1

# Logging settings
LOGGING_SETTINGS = {
    "level": "INFO",
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
}


def get_app_info():
    """애플리케이션 정보 반환"""
    return {
        "name": APP_NAME,
        "version": VERSION,
        "author": AUTHOR,
        "protocol": PROTOCOL_VERSION,
        "data_dir": str(USER_DATA_DIR),
        "runs_dir": str(RUNS_DIR),
        "log_file": str(LOG_FILE),
    }
