"""
Scene configuration
- One JSON file (SI meters) describes a reproducible run
- Defaults come from config.py; desk-scale preset for quick runs
"""

import copy
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

import config
from core.errors import ConfigError
from core.geometry import IndenterSpec
from core.material import MaterialParams
from core.renderer import AlignmentTable, LightSource, RenderParams
from data.storage import atomic_write_text
from utils.scene_validator import SceneValidator

logger = logging.getLogger(__name__)


def deep_merge(base, overrides):
    """Recursively merge overrides into a copy of base (dicts only; lists replace)"""
    merged = copy.deepcopy(base)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass
class ElastomerConfig:
    dims: list = field(default_factory=lambda: list(config.DEFAULT_ELASTOMER["dims"]))
    counts: list = field(default_factory=lambda: list(config.DEFAULT_ELASTOMER["counts"]))
    n_fixed: int = config.DEFAULT_ELASTOMER["n_fixed"]

    @property
    def spacing(self):
        return [d / (n - 1) for d, n in zip(self.dims, self.counts)]

    @property
    def particle_count(self):
        return int(np.prod(self.counts))

    @classmethod
    def from_dict(cls, data):
        return cls(
            dims=[float(v) for v in data["dims"]],
            counts=[int(v) for v in data["counts"]],
            n_fixed=int(data["n_fixed"]),
        )

    def to_dict(self):
        return {"dims": list(self.dims), "counts": list(self.counts), "n_fixed": self.n_fixed}


@dataclass
class GridConfig:
    resolution: list = field(default_factory=lambda: list(config.DEFAULT_GRID["resolution"]))
    edge: float = config.DEFAULT_GRID["edge"]
    origin: Optional[list] = None
    floor_margin: int = config.DEFAULT_GRID["floor_margin"]

    @property
    def node_spacing(self):
        return self.edge / max(self.resolution)

    def resolved_origin(self):
        """Explicit origin, or x/y centered on the sensor with floor_margin nodes below the gel"""
        if self.origin is not None:
            return np.asarray(self.origin, dtype=np.float64)
        dx = self.node_spacing
        return np.array([
            -(self.resolution[0] - 1) * dx / 2.0,
            -(self.resolution[1] - 1) * dx / 2.0,
            -self.floor_margin * dx,
        ])

    @classmethod
    def from_dict(cls, data):
        origin = data.get("origin")
        return cls(
            resolution=[int(v) for v in data["resolution"]],
            edge=float(data["edge"]),
            origin=None if origin is None else [float(v) for v in origin],
            floor_margin=int(data["floor_margin"]),
        )

    def to_dict(self):
        return {
            "resolution": list(self.resolution),
            "edge": self.edge,
            "origin": None if self.origin is None else list(self.origin),
            "floor_margin": self.floor_margin,
        }


@dataclass
class TimeConfig:
    """dt is the control step; physics runs n_substeps per control step (0 = auto from cfl)"""

    dt: float = config.DEFAULT_TIME["dt"]
    n_substeps: int = config.DEFAULT_TIME["n_substeps"]
    cfl: float = config.DEFAULT_TIME["cfl"]
    gravity: bool = config.DEFAULT_TIME["gravity"]
    damping: float = config.DEFAULT_TIME["damping"]

    def min_substeps(self, node_spacing, material):
        limit = self.cfl * node_spacing / material.wave_speed
        return max(1, math.ceil(self.dt / limit - 1e-9))

    def physics_step(self, node_spacing, material):
        """(physics dt, substeps per control step)"""
        n = int(self.n_substeps) if self.n_substeps > 0 else self.min_substeps(node_spacing, material)
        return self.dt / n, n

    @classmethod
    def from_dict(cls, data):
        return cls(
            dt=float(data["dt"]),
            n_substeps=int(data["n_substeps"]),
            cfl=float(data["cfl"]),
            gravity=bool(data["gravity"]),
            damping=float(data["damping"]),
        )

    def to_dict(self):
        return {
            "dt": self.dt,
            "n_substeps": self.n_substeps,
            "cfl": self.cfl,
            "gravity": self.gravity,
            "damping": self.damping,
        }


@dataclass
class PressConfig:
    """Press grid centered on the sensor; depths measured from first contact"""

    grid_shape: list = field(default_factory=lambda: list(config.DEFAULT_PRESS["grid_shape"]))
    step: float = config.DEFAULT_PRESS["step"]
    depths: list = field(default_factory=lambda: list(config.DEFAULT_PRESS["depths"]))
    speed: float = config.DEFAULT_PRESS["speed"]
    settle_steps: int = config.DEFAULT_PRESS["settle_steps"]

    def positions(self):
        """[(position id, (x, y) meters)] in row-major order"""
        nx, ny = self.grid_shape
        result = []
        for iy in range(ny):
            for ix in range(nx):
                x = (ix - (nx - 1) / 2.0) * self.step
                y = (iy - (ny - 1) / 2.0) * self.step
                result.append((iy * nx + ix, (x, y)))
        return result

    @classmethod
    def from_dict(cls, data):
        return cls(
            grid_shape=[int(v) for v in data["grid_shape"]],
            step=float(data["step"]),
            depths=[float(v) for v in data["depths"]],
            speed=float(data["speed"]),
            settle_steps=int(data["settle_steps"]),
        )

    def to_dict(self):
        return {
            "grid_shape": list(self.grid_shape),
            "step": self.step,
            "depths": list(self.depths),
            "speed": self.speed,
            "settle_steps": self.settle_steps,
        }


@dataclass
class RenderConfig:
    k_a: float = config.DEFAULT_RENDER["k_a"]
    k_d: float = config.DEFAULT_RENDER["k_d"]
    k_s: float = config.DEFAULT_RENDER["k_s"]
    alpha: float = config.DEFAULT_RENDER["alpha"]
    ambient: list = field(default_factory=lambda: list(config.DEFAULT_RENDER["ambient"]))
    view: list = field(default_factory=lambda: list(config.DEFAULT_RENDER["view"]))
    pixel_size: float = config.DEFAULT_RENDER["pixel_size"]
    image_shape: list = field(default_factory=lambda: list(config.DEFAULT_RENDER["image_shape"]))
    background_path: Optional[str] = None
    lights: list = field(default_factory=lambda: copy.deepcopy(config.DEFAULT_LIGHTS))

    def light_sources(self):
        return [LightSource.from_dict(light) for light in self.lights]

    def params(self, background=None):
        return RenderParams(
            k_a=self.k_a,
            k_d=self.k_d,
            k_s=self.k_s,
            alpha=self.alpha,
            ambient=self.ambient,
            view=self.view,
            background=background,
        )

    @classmethod
    def from_dict(cls, data):
        return cls(
            k_a=float(data["k_a"]),
            k_d=float(data["k_d"]),
            k_s=float(data["k_s"]),
            alpha=float(data["alpha"]),
            ambient=[float(v) for v in data["ambient"]],
            view=[float(v) for v in data["view"]],
            pixel_size=float(data["pixel_size"]),
            image_shape=[int(v) for v in data["image_shape"]],
            background_path=data.get("background_path"),
            lights=copy.deepcopy(list(data["lights"])),
        )

    def to_dict(self):
        return {
            "k_a": self.k_a,
            "k_d": self.k_d,
            "k_s": self.k_s,
            "alpha": self.alpha,
            "ambient": list(self.ambient),
            "view": list(self.view),
            "pixel_size": self.pixel_size,
            "image_shape": list(self.image_shape),
            "background_path": self.background_path,
            "lights": copy.deepcopy(self.lights),
        }


def default_scene_dict():
    return {
        "elastomer": copy.deepcopy(config.DEFAULT_ELASTOMER),
        "material": copy.deepcopy(config.DEFAULT_MATERIAL),
        "grid": copy.deepcopy(config.DEFAULT_GRID),
        "time": copy.deepcopy(config.DEFAULT_TIME),
        "indenter": copy.deepcopy(config.DEFAULT_INDENTER),
        "press": copy.deepcopy(config.DEFAULT_PRESS),
        "render": copy.deepcopy(config.DEFAULT_RENDER),
        "alignment": copy.deepcopy(config.DEFAULT_ALIGNMENT),
        "objects": [],
        "output_dir": str(config.RUNS_DIR),
        "deterministic": True,
    }


@dataclass
class SceneConfig:
    """Everything a run needs; serializable so a run is reproducible from its config alone"""

    elastomer: ElastomerConfig = field(default_factory=ElastomerConfig)
    material: MaterialParams = field(default_factory=MaterialParams)
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    indenter: IndenterSpec = field(default_factory=IndenterSpec)
    press: PressConfig = field(default_factory=PressConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    alignment: AlignmentTable = field(default_factory=AlignmentTable)
    objects: list = field(default_factory=list)
    output_dir: str = str(config.RUNS_DIR)
    deterministic: bool = True

    @classmethod
    def from_dict(cls, data):
        """Missing keys fall back to the defaults"""
        merged = deep_merge(default_scene_dict(), data)
        return cls(
            elastomer=ElastomerConfig.from_dict(merged["elastomer"]),
            material=MaterialParams.from_dict(merged["material"]),
            grid=GridConfig.from_dict(merged["grid"]),
            time=TimeConfig.from_dict(merged["time"]),
            indenter=IndenterSpec.from_dict(merged["indenter"]),
            press=PressConfig.from_dict(merged["press"]),
            render=RenderConfig.from_dict(merged["render"]),
            alignment=AlignmentTable.from_dict(merged["alignment"]),
            objects=[str(p) for p in merged["objects"]],
            output_dir=str(merged["output_dir"]),
            deterministic=bool(merged["deterministic"]),
        )

    @classmethod
    def desk(cls):
        """Reduced scene: 64^3 grid, 10 x 10 x 4 mm gel"""
        return cls.from_dict(config.DESK_SCALE_OVERRIDES)

    def to_dict(self):
        return {
            "elastomer": self.elastomer.to_dict(),
            "material": self.material.to_dict(),
            "grid": self.grid.to_dict(),
            "time": self.time.to_dict(),
            "indenter": self.indenter.to_dict(),
            "press": self.press.to_dict(),
            "render": self.render.to_dict(),
            "alignment": self.alignment.to_dict(),
            "objects": list(self.objects),
            "output_dir": self.output_dir,
            "deterministic": self.deterministic,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def with_overrides(self, overrides):
        return SceneConfig.from_dict(deep_merge(self.to_dict(), overrides))

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        except OSError as e:
            logger.error(f"Could not read scene config {path}: {e}")
            raise
        scene = cls.from_dict(data)
        logger.info(f"Scene config loaded from {path}")
        return scene

    def save(self, path):
        atomic_write_text(Path(path), self.to_json())

    def validate(self, indenter_cloud=None):
        """Raise ConfigError listing every error; returns the full report otherwise"""
        report = SceneValidator().validate_scene_comprehensive(self, indenter_cloud)
        for warning in report["warnings"]:
            logger.warning(f"Scene config: {warning}")
        for suggestion in report["suggestions"]:
            logger.info(f"Scene config suggestion: {suggestion}")
        if report["errors"]:
            raise ConfigError(report["errors"])
        return report
