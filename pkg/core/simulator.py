"""
Tactile simulator
- Assembles elastomer + indenter from a SceneConfig
- Advances the MPM state at the control rate (substeps inside)
- Captures depth maps and rendered tactile images
"""

import logging
import math
from pathlib import Path

import numpy as np

from core import mpm_solver
from core.errors import PhysicsFault
from core.geometry import load_point_cloud, make_elastomer_lattice, place_indenter, subsample
from core.renderer import crop_align, extract_surface_depth, phong_render
from data.storage import read_image

logger = logging.getLogger(__name__)


class TactileSimulator:
    """One sensor + one indenter, driven by commanded indenter velocities"""

    def __init__(self, scene, indenter_cloud=None, press_xy=(0.0, 0.0), gap=None, object_name=None):
        """
        Args:
            scene: validated SceneConfig
            indenter_cloud: ParticleSet in the object's own frame; loaded from
                scene.indenter.cloud_path when omitted
            press_xy: horizontal offset added to the indenter pose, meters
            gap: initial clearance above the gel; scene.indenter.gap when omitted
            object_name: key into the alignment table
        """
        self.scene = scene
        self.object_name = object_name
        self.gap = scene.indenter.gap if gap is None else float(gap)

        self.elastomer = make_elastomer_lattice(
            scene.elastomer.dims, scene.elastomer.counts, n_fixed=scene.elastomer.n_fixed
        )
        if indenter_cloud is None:
            indenter_cloud = load_point_cloud(scene.indenter.cloud_path)
        cloud = subsample(indenter_cloud, scene.indenter.target_count, seed=scene.indenter.seed)
        surface_z = float(scene.elastomer.dims[2])
        self.indenter = place_indenter(cloud, scene.indenter.to_pose(press_xy), surface_z=surface_z, gap=self.gap)

        self.state = mpm_solver.init_scene(scene, self.elastomer, self.indenter)
        self.control_dt = float(scene.time.dt)
        self.offset = np.zeros(3)
        self.control_steps = 0

        self.lights = scene.render.light_sources()
        background = None
        if scene.render.background_path:
            background = read_image(Path(scene.render.background_path))
        self.render_params = scene.render.params(background)

    @property
    def particle_count(self):
        return len(self.indenter)

    @property
    def indentation(self):
        """How far the indenter tip has passed the rest surface, meters (0 before contact)"""
        return max(0.0, -self.offset[2] - self.gap)

    def advance(self, velocity, n_steps=1):
        """
        Run n_steps control steps at a fixed indenter velocity

        A PhysicsFault rolls the particles back to the start of the failing
        control step, so the state always matches offset and control_steps.
        """
        velocity = np.asarray(velocity, dtype=np.float64).reshape(3)
        for _ in range(int(n_steps)):
            snapshot = self.state.snapshot()
            try:
                mpm_solver.step(self.state, velocity)
            except PhysicsFault:
                self.state.restore(snapshot)
                logger.warning(f"Physics fault at control step {self.control_steps + 1}; state rolled back")
                raise
            self.offset += velocity * self.control_dt
            self.control_steps += 1
        return self.state

    def move_by(self, displacement, speed):
        """
        Travel an exact displacement at (at most) the given speed

        The step count is rounded up and the velocity reduced so the travel
        ends exactly on the target.
        """
        displacement = np.asarray(displacement, dtype=np.float64).reshape(3)
        distance = float(np.linalg.norm(displacement))
        if distance == 0.0:
            return 0
        n_steps = max(1, math.ceil(distance / (speed * self.control_dt) - 1e-9))
        velocity = displacement / (n_steps * self.control_dt)
        self.advance(velocity, n_steps)
        return n_steps

    def move_to_depth(self, depth, speed):
        """Place the tip depth below the rest surface (gap included)"""
        target = -(self.gap + depth)
        return self.move_by((0.0, 0.0, target - self.offset[2]), speed)

    def settle(self, n_steps):
        return self.advance(np.zeros(3), n_steps)

    def depth_map(self):
        """Full-footprint depth map (sensor centered)"""
        return extract_surface_depth(
            self.state, pixel_size=self.scene.render.pixel_size, image_shape=tuple(self.scene.render.image_shape)
        )

    def capture(self):
        """(TactileImage, camera-frame DepthMap)"""
        alignment = self.scene.alignment.lookup(self.object_name)
        depth = crop_align(self.depth_map(), alignment, image_shape=tuple(self.scene.render.image_shape))
        image = phong_render(depth, self.lights, self.render_params)
        return image, depth
