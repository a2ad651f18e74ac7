"""
Depth maps and tactile image rendering
- Surface depth map interpolated from the deformed top lattice layer
- Per-object crop / alignment to the 480 x 640 camera frame
- Surface normals and Phong shading with a multi-light rig
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from core.errors import CropOutOfBounds, NoSurface, ShapeMismatch

logger = logging.getLogger(__name__)

IMAGE_SHAPE = (480, 640)
DEFAULT_PIXEL_SIZE = 2.8125e-5  # 640 px span 18 mm


@dataclass
class DepthMap:
    """Displacement below the rest surface (meters) on a pixel grid; rows follow y, columns x"""

    values: np.ndarray
    pixel_size: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"Depth map must be 2-D (got shape {self.values.shape})")
        if not self.pixel_size > 0:
            raise ValueError(f"pixel_size must be > 0 (got {self.pixel_size})")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def max_depth(self):
        return float(self.values.max())

    def contact_centroid(self, threshold=None):
        """(col, row) centroid of pixels deeper than threshold (half the max depth by default)"""
        if threshold is None:
            threshold = 0.5 * self.max_depth
        mask = self.values > threshold
        if not mask.any() or self.max_depth <= 0.0:
            return None
        rows, cols = np.nonzero(mask)
        return float(cols.mean()), float(rows.mean())


@dataclass
class LightSource:
    """Directional light; direction points from the surface toward the light"""

    direction: np.ndarray
    diffuse: np.ndarray
    specular: np.ndarray

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=np.float64).reshape(3)
        self.diffuse = np.asarray(self.diffuse, dtype=np.float64).reshape(3)
        self.specular = np.asarray(self.specular, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(self.direction)
        if abs(norm - 1.0) > 1e-3:
            raise ValueError(f"Light direction must be a unit vector (|L| = {norm:.6f})")
        if norm != 1.0:
            self.direction = self.direction / norm

    @classmethod
    def from_angles(cls, azimuth_deg, elevation_deg, diffuse, specular):
        """Light at an azimuth around z and an elevation toward the camera side (-z)"""
        az = np.deg2rad(azimuth_deg)
        el = np.deg2rad(elevation_deg)
        direction = np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), -np.sin(el)])
        return cls(direction=direction, diffuse=diffuse, specular=specular)

    @classmethod
    def from_dict(cls, data):
        if "direction" in data:
            return cls(direction=data["direction"], diffuse=data["diffuse"], specular=data["specular"])
        return cls.from_angles(data["azimuth_deg"], data["elevation_deg"], data["diffuse"], data["specular"])


@dataclass
class RenderParams:
    """Phong reflectance parameters"""

    k_a: float = 0.3
    k_d: float = 0.6
    k_s: float = 0.15
    alpha: float = 20.0
    ambient: np.ndarray = field(default_factory=lambda: np.full(3, 0.4))
    view: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    background: Optional[np.ndarray] = None

    def __post_init__(self):
        self.ambient = np.asarray(self.ambient, dtype=np.float64).reshape(3)
        self.view = np.asarray(self.view, dtype=np.float64).reshape(3)
        self.view = self.view / np.linalg.norm(self.view)

    def validate(self):
        errors = []
        for name in ("k_a", "k_d", "k_s"):
            if getattr(self, name) < 0:
                errors.append(f"{name} must be >= 0 (got {getattr(self, name)})")
        if self.alpha < 1:
            errors.append(f"alpha must be >= 1 (got {self.alpha})")
        return errors


@dataclass
class TactileImage:
    """480 x 640 RGB, uint8"""

    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.shape != IMAGE_SHAPE + (3,) or self.pixels.dtype != np.uint8:
            raise ShapeMismatch(
                f"Tactile image must be uint8 {IMAGE_SHAPE + (3,)} (got {self.pixels.dtype} {self.pixels.shape})"
            )

    def bgr(self):
        """Channel order for cv2"""
        return np.ascontiguousarray(self.pixels[..., ::-1])


@dataclass
class Alignment:
    """Pixel offset (x = columns, y = rows) and zoom applied before the centered crop"""

    offset: tuple = (0, 0)
    scale: float = 1.0


class AlignmentTable:
    """Per-object alignments with a default entry"""

    def __init__(self, default=None, per_object=None):
        self.default = default or Alignment()
        self.per_object = dict(per_object or {})

    def lookup(self, object_name):
        return self.per_object.get(object_name, self.default)

    @classmethod
    def from_dict(cls, data):
        def entry(d):
            return Alignment(offset=tuple(int(v) for v in d.get("offset", (0, 0))), scale=float(d.get("scale", 1.0)))

        return cls(
            default=entry(data.get("default", {})),
            per_object={name: entry(d) for name, d in data.get("per_object", {}).items()},
        )

    def to_dict(self):
        def entry(a):
            return {"offset": [int(a.offset[0]), int(a.offset[1])], "scale": float(a.scale)}

        return {
            "default": entry(self.default),
            "per_object": {name: entry(a) for name, a in sorted(self.per_object.items())},
        }


def depth_map_shape(dims_xy, pixel_size, image_shape=IMAGE_SHAPE):
    """Rows x columns covering the elastomer footprint and at least the camera frame"""
    rows = max(image_shape[0], int(np.ceil(dims_xy[1] / pixel_size)) + 1)
    cols = max(image_shape[1], int(np.ceil(dims_xy[0] / pixel_size)) + 1)
    return rows, cols


def interpolate_surface(xs, ys, depth_grid, pixel_size, shape):
    """
    Bilinear resampling of a structured surface onto a sensor-centered pixel grid

    Args:
        xs, ys: reference lattice coordinates (ascending), meters
        depth_grid: (len(xs), len(ys)) depth values
        pixel_size: meters per pixel
        shape: (rows, cols)

    Returns:
        (rows, cols) array, zero outside the lattice footprint
    """
    rows, cols = shape
    interpolator = RegularGridInterpolator(
        (xs, ys), depth_grid, method="linear", bounds_error=False, fill_value=0.0
    )
    px = (np.arange(cols) - (cols - 1) / 2.0) * pixel_size
    py = (np.arange(rows) - (rows - 1) / 2.0) * pixel_size
    gy, gx = np.meshgrid(py, px, indexing="ij")
    return interpolator(np.stack([gx.ravel(), gy.ravel()], axis=1)).reshape(rows, cols)


def extract_surface_depth(state, pixel_size=DEFAULT_PIXEL_SIZE, image_shape=IMAGE_SHAPE):
    """Depth map z0 - z of the top surface layer; bulges stay negative"""
    if state.surface_index is None or state.surface_index.size == 0:
        raise NoSurface("Simulation state has no top-surface lattice layer")

    z = state.positions[state.surface_index, 2]
    depth_grid = state.surface_z0 - z
    xs, ys = state.surface_x, state.surface_y
    dims_xy = (xs[-1] - xs[0], ys[-1] - ys[0])
    shape = depth_map_shape(dims_xy, pixel_size, image_shape)
    values = interpolate_surface(xs, ys, depth_grid, pixel_size, shape)
    return DepthMap(values=values, pixel_size=pixel_size)


def crop_align(depth, alignment=None, image_shape=IMAGE_SHAPE):
    """
    Zoom by alignment.scale, then crop image_shape around the center shifted by alignment.offset

    A positive x offset moves the window right, so content moves left in the output.
    """
    alignment = alignment or Alignment()
    values = depth.values
    pixel_size = depth.pixel_size
    if alignment.scale != 1.0:
        values = ndimage.zoom(values, alignment.scale, order=1)
        pixel_size = pixel_size / alignment.scale

    rows, cols = image_shape
    height, width = values.shape
    top = (height - rows) // 2 + int(alignment.offset[1])
    left = (width - cols) // 2 + int(alignment.offset[0])
    if top < 0 or left < 0 or top + rows > height or left + cols > width:
        raise CropOutOfBounds(
            f"Crop window {rows}x{cols} at (row {top}, col {left}) does not fit a {height}x{width} depth map"
        )
    return DepthMap(values=values[top:top + rows, left:left + cols].copy(), pixel_size=pixel_size)


def surface_normals(depth):
    """
    Unit normals of the height field H = -depth

    Central differences (f[i+1] - f[i-1]) / 2r inside, one-sided at the border.
    Returns an (rows, cols, 3) array of normalize(dH/dx, dH/dy, -1).
    """
    height = -depth.values
    dh_dy, dh_dx = np.gradient(height, depth.pixel_size)
    normals = np.stack([dh_dx, dh_dy, -np.ones_like(height)], axis=-1)
    return normals / np.linalg.norm(normals, axis=-1, keepdims=True)


def shade(depth, lights, params):
    """Phong intensity in [0, 1] before quantization, (rows, cols, 3) RGB"""
    if not lights:
        raise ValueError("At least one light source is required")
    normals = surface_normals(depth)
    intensity = np.broadcast_to(params.k_a * params.ambient, normals.shape).copy()

    for light in lights:
        l_dot_n = normals @ light.direction
        reflect = 2.0 * l_dot_n[..., None] * normals - light.direction
        lit = l_dot_n > 0.0
        r_dot_v = np.where(lit, np.clip(reflect @ params.view, 0.0, None), 0.0)
        intensity += params.k_d * np.clip(l_dot_n, 0.0, None)[..., None] * light.diffuse
        intensity += params.k_s * (r_dot_v ** params.alpha)[..., None] * light.specular

    if params.background is not None:
        if params.background.shape[:2] != intensity.shape[:2]:
            raise ShapeMismatch(
                f"Background {params.background.shape[:2]} does not match depth map {intensity.shape[:2]}"
            )
        intensity += params.background.astype(np.float64) / 255.0
    return intensity


def quantize(intensity):
    return np.round(np.clip(intensity, 0.0, 1.0) * 255.0).astype(np.uint8)


def phong_render(depth, lights, params):
    """Clamp-then-quantize Phong image of a camera-frame depth map"""
    return TactileImage(pixels=quantize(shade(depth, lights, params)))
