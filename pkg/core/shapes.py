"""
Analytic indenter corpus
- 21 stamp-shaped objects defined by their contact profile z_tip(x, y)
- Uniform volume sampling (seeded) and PLY export in millimeters
"""

import logging
from pathlib import Path

import numpy as np

from core.geometry import FILE_UNIT, ParticleSet, write_point_cloud
from core.mpm_solver import MaterialTag

logger = logging.getLogger(__name__)

# Stamp frame in millimeters: contact tip at z = 0, material up to STAMP_HEIGHT,
# footprint inside |x|, |y| <= HALF_WIDTH. Reliefs sit on a plate RELIEF_DEPTH
# above the tip so the plate never touches within a 1 mm press.
HALF_WIDTH = 3.0
STAMP_HEIGHT = 3.0
RELIEF_DEPTH = 1.5
NO_MATERIAL = np.inf

DEFAULT_POINT_COUNT = 1_000_000


def _square(x, y, half=2.5):
    return (np.abs(x) <= half) & (np.abs(y) <= half)


def _regular_polygon(x, y, n_sides, circumradius, rotation=0.0):
    apothem = circumradius * np.cos(np.pi / n_sides)
    inside = np.ones_like(x, dtype=bool)
    for k in range(n_sides):
        theta = rotation + 2.0 * np.pi * k / n_sides + np.pi / n_sides
        inside &= x * np.cos(theta) + y * np.sin(theta) <= apothem
    return inside


def _relief(x, y, raised, plate):
    """Raised features at the tip, plate behind them, nothing elsewhere"""
    z = np.where(plate, RELIEF_DEPTH, NO_MATERIAL)
    return np.where(raised & plate, 0.0, z)


def _cap(r, radius):
    inside = r < radius
    return np.where(inside, radius - np.sqrt(np.clip(radius ** 2 - r ** 2, 0.0, None)), NO_MATERIAL)


def sphere(x, y):
    return _cap(np.hypot(x, y), 3.0)


def sphere2(x, y):
    return _cap(np.hypot(x, y), 2.0)


def cone(x, y):
    r = np.hypot(x, y)
    return np.where(r < 2.8, r, NO_MATERIAL)


def cylinder(x, y):
    return np.where(np.hypot(x, y) < 2.0, 0.0, NO_MATERIAL)


def cylinder_shell(x, y):
    r = np.hypot(x, y)
    return _relief(x, y, r > 1.2, r < 2.0)


def cylinder_side(x, y):
    # lying cylinder, axis along y
    radius = 1.5
    inside = (np.abs(x) < radius) & (np.abs(y) < 2.5)
    return np.where(inside, radius - np.sqrt(np.clip(radius ** 2 - x ** 2, 0.0, None)), NO_MATERIAL)


def curved_surface(x, y):
    return np.where(_square(x, y, 2.8), x ** 2 / 12.0, NO_MATERIAL)


def dot_in(x, y):
    r = np.hypot(x, y)
    return _relief(x, y, r > 0.6, r < 2.5)


def dots(x, y):
    raised = np.zeros_like(x, dtype=bool)
    for cx in (-1.5, 0.0, 1.5):
        for cy in (-1.5, 0.0, 1.5):
            raised |= np.hypot(x - cx, y - cy) < 0.4
    return _relief(x, y, raised, _square(x, y))


def flat_slab(x, y):
    return np.where(_square(x, y), 0.0, NO_MATERIAL)


def hexagon(x, y):
    return np.where(_regular_polygon(x, y, 6, 2.2), 0.0, NO_MATERIAL)


def line(x, y):
    return _relief(x, y, np.abs(x) < 0.3, _square(x, y))


def parallel_lines(x, y):
    raised = (np.abs(x + 1.5) < 0.25) | (np.abs(x) < 0.25) | (np.abs(x - 1.5) < 0.25)
    return _relief(x, y, raised, _square(x, y))


def cross_lines(x, y):
    return _relief(x, y, (np.abs(x) < 0.3) | (np.abs(y) < 0.3), _square(x, y))


def moon(x, y):
    crescent = (np.hypot(x, y) < 2.0) & (np.hypot(x - 0.8, y) >= 1.6)
    return np.where(crescent, 0.0, NO_MATERIAL)


def pacman(x, y):
    mouth = np.abs(np.arctan2(y, x)) < np.pi / 6
    return np.where((np.hypot(x, y) < 2.0) & ~mouth, 0.0, NO_MATERIAL)


def prism(x, y):
    # triangular roof, ridge along y
    inside = (np.abs(x) < 2.0) & (np.abs(y) < 2.5)
    return np.where(inside, np.abs(x), NO_MATERIAL)


_RANDOM_CENTERS = np.random.default_rng(2024).uniform(-2.0, 2.0, size=(8, 2))


def random_bumps(x, y):
    bumps = np.zeros_like(x, dtype=np.float64)
    for cx, cy in _RANDOM_CENTERS:
        bumps += np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / 0.35)
    z = np.clip(0.8 * (1.0 - bumps), 0.0, None)
    return np.where(_square(x, y), z, NO_MATERIAL)


def torus(x, y):
    major, minor = 1.8, 0.6
    d = np.hypot(x, y) - major
    inside = np.abs(d) < minor
    return np.where(inside, minor - np.sqrt(np.clip(minor ** 2 - d ** 2, 0.0, None)), NO_MATERIAL)


def triangle(x, y):
    return np.where(_regular_polygon(x, y, 3, 2.4, rotation=np.pi / 2), 0.0, NO_MATERIAL)


def wave1(x, y):
    return np.where(_square(x, y), 0.5 * (1.0 - np.cos(np.pi * x)), NO_MATERIAL)


SHAPES = {
    "cone": cone,
    "cross_lines": cross_lines,
    "curved_surface": curved_surface,
    "cylinder": cylinder,
    "cylinder_shell": cylinder_shell,
    "cylinder_side": cylinder_side,
    "dot_in": dot_in,
    "dots": dots,
    "flat_slab": flat_slab,
    "hexagon": hexagon,
    "line": line,
    "moon": moon,
    "pacman": pacman,
    "parallel_lines": parallel_lines,
    "prism": prism,
    "random": random_bumps,
    "sphere": sphere,
    "sphere2": sphere2,
    "torus": torus,
    "triangle": triangle,
    "wave1": wave1,
}


def generate_object(name, count=DEFAULT_POINT_COUNT, seed=0, batch=200_000):
    """
    Sample count points uniformly inside a stamp

    Args:
        name: key of SHAPES
        count: number of points
        seed: sampling seed (the shape itself never changes)

    Returns:
        ParticleSet in meters, tip at z = 0, footprint centered on the z axis
    """
    if name not in SHAPES:
        raise KeyError(f"Unknown object '{name}'; choose from {sorted(SHAPES)}")
    profile = SHAPES[name]
    rng = np.random.default_rng(seed)

    accepted = []
    n_accepted = 0
    while n_accepted < count:
        xy = rng.uniform(-HALF_WIDTH, HALF_WIDTH, size=(batch, 2))
        z = rng.uniform(0.0, STAMP_HEIGHT, size=batch)
        keep = z >= profile(xy[:, 0], xy[:, 1])
        chunk = np.column_stack([xy[keep], z[keep]])
        accepted.append(chunk)
        n_accepted += len(chunk)

    points = np.concatenate(accepted)[:count]
    return ParticleSet(positions=points * FILE_UNIT, tag=MaterialTag.INDENTER, source=f"analytic:{name}")


def write_object_corpus(output_dir, names=None, count=DEFAULT_POINT_COUNT, seed=0):
    """Write <name>.ply for each object; returns {name: path}"""
    output_dir = Path(output_dir)
    names = sorted(SHAPES) if not names else list(names)
    written = {}
    for name in names:
        cloud = generate_object(name, count=count, seed=seed)
        written[name] = write_point_cloud(output_dir / f"{name}.ply", cloud)
    logger.info(f"Generated {len(written)} objects ({count} points each) in {output_dir}")
    return written
