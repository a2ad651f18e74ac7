"""
Desk-scale presses (64^3 grid, about 2e4 elastomer particles); minutes each

Run with: pytest -m slow
"""

import numpy as np
import pytest

from core import shapes
from core.dataset import PressDatasetManager
from core.scene_config import SceneConfig
from core.simulator import TactileSimulator

pytestmark = pytest.mark.slow

# grid damping (1/s) for runs that must settle after a retract
RECOVERY_DAMPING = 100.0


@pytest.fixture(scope="module")
def desk_scene():
    return SceneConfig.desk().with_overrides({"press": {"speed": 0.02}})


@pytest.fixture(scope="module")
def sphere_cloud(desk_scene):
    return shapes.generate_object("sphere", count=desk_scene.indenter.target_count, seed=0)


def test_sphere_press_depth(desk_scene, sphere_cloud):
    assert desk_scene.time.damping == 0.0
    assert len(sphere_cloud) == 10_000
    sim = TactileSimulator(desk_scene, indenter_cloud=sphere_cloud, object_name="sphere")
    state = sim.state

    sim.move_to_depth(1e-3, speed=0.02)
    sim.settle(50)
    depth = sim.depth_map()
    assert 0.8e-3 <= depth.max_depth <= 1.0e-3
    col, row = depth.contact_centroid()
    assert abs(col - (depth.values.shape[1] - 1) / 2) < 3
    assert abs(row - (depth.values.shape[0] - 1) / 2) < 3
    assert np.all(np.linalg.det(state.deformation[state.elastomer_mask]) > 0.0)


def test_sphere_press_and_recovery(desk_scene, sphere_cloud):
    scene = desk_scene.with_overrides({"time": {"damping": RECOVERY_DAMPING}})
    sim = TactileSimulator(scene, indenter_cloud=sphere_cloud, object_name="sphere")
    state = sim.state

    sim.move_to_depth(1e-3, speed=0.02)
    sim.settle(50)
    assert 0.8e-3 <= sim.depth_map().max_depth <= 1.0e-3

    sim.move_by((0.0, 0.0, -sim.offset[2]), speed=0.02)
    sim.settle(400)
    assert sim.indentation == 0.0
    assert sim.depth_map().max_depth < 5e-5
    assert np.all(np.linalg.det(state.deformation[state.elastomer_mask]) > 0.0)


def test_sparser_indenters_are_rougher(desk_scene, tmp_path):
    scene = desk_scene.with_overrides({
        "time": {"damping": RECOVERY_DAMPING},
        "press": {"grid_shape": [1, 1], "depths": [0.0, 1e-3], "settle_steps": 20},
    })
    manager = PressDatasetManager(scene, output_dir=tmp_path, analytic_count=1_000_000)
    errors = manager.run_density_variants("sphere", counts=[10_000, 100_000, 1_000_000])
    assert errors[10_000] > errors[100_000] > 0.0
    assert errors[1_000_000] == 0.0
