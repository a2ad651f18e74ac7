"""
Shared fixtures: small scenes that run in well under a second per step
"""

import numpy as np
import pytest

from core.geometry import ParticleSet
from core.material import MaterialParams
from core.mpm_solver import Grid, MaterialTag, SimState
from core.scene_config import SceneConfig


def make_state(positions, velocities=None, affine=None, deformation=None, tags=None,
               resolution=8, node_spacing=1e-3, origin=(0.0, 0.0, 0.0), dt=1e-5,
               mass=None, rest_volume=None, deterministic=True):
    """SimState built directly from arrays (no lattice bookkeeping)"""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(positions)
    if rest_volume is None:
        rest_volume = np.full(n, node_spacing ** 3 / 8.0)
    if mass is None:
        mass = 1000.0 * np.asarray(rest_volume)
    return SimState(
        positions=positions.copy(),
        velocities=np.zeros((n, 3)) if velocities is None else np.array(velocities, dtype=np.float64),
        affine=np.zeros((n, 3, 3)) if affine is None else np.array(affine, dtype=np.float64),
        deformation=np.tile(np.eye(3), (n, 1, 1)) if deformation is None else np.array(deformation, dtype=np.float64),
        mass=np.asarray(mass, dtype=np.float64),
        rest_volume=np.asarray(rest_volume, dtype=np.float64),
        tags=np.full(n, MaterialTag.ELASTOMER, dtype=np.int8) if tags is None else np.asarray(tags, dtype=np.int8),
        grid=Grid.allocate((resolution,) * 3, node_spacing, origin),
        material=MaterialParams(),
        dt=dt,
        deterministic=deterministic,
    )


def box_cloud(center, half_extent, count, seed=0):
    rng = np.random.default_rng(seed)
    center = np.asarray(center, dtype=np.float64)
    points = center + rng.uniform(-1.0, 1.0, size=(count, 3)) * np.asarray(half_extent)
    return ParticleSet(positions=points, tag=MaterialTag.INDENTER, source="box")


@pytest.fixture
def small_scene(tmp_path):
    """2 x 2 x 1 mm gel of 9 x 9 x 5 particles in a 16^3 grid (dX = 0.25 mm)"""
    return SceneConfig.from_dict({
        "elastomer": {"dims": [0.002, 0.002, 0.001], "counts": [9, 9, 5], "n_fixed": 1},
        "grid": {"resolution": [16, 16, 16], "edge": 0.004, "origin": None, "floor_margin": 3},
        "time": {"dt": 1e-4, "n_substeps": 0},
        "indenter": {"target_count": 60, "seed": 3, "gap": 1e-4},
        "press": {"grid_shape": [1, 1], "step": 1e-3, "depths": [0.0, 1e-4], "speed": 0.05, "settle_steps": 2},
        "output_dir": str(tmp_path / "runs"),
    })


@pytest.fixture
def small_indenter():
    """Box of points in the object frame, lowest point near z = 0 (0.6 x 0.6 x 0.4 mm)"""
    return box_cloud((0.0, 0.0, 2e-4), (3e-4, 3e-4, 2e-4), 200, seed=11)
