"""
Scene Validator for the GelMPM simulator
- 설정 전체를 한 번에 검사 (errors / warnings / suggestions)
- Grid margin and timestep stability checks
"""

import logging

import numpy as np

from core.geometry import place_indenter

logger = logging.getLogger(__name__)

MIN_GRID_NODES = 8
GRID_MARGIN_NODES = 2.0


class SceneValidator:
    """Validator for SceneConfig consistency"""

    def check_material(self, scene, result):
        result["errors"].extend(scene.material.validate())

    def check_elastomer(self, scene, result):
        elastomer = scene.elastomer
        if len(elastomer.dims) != 3 or len(elastomer.counts) != 3:
            result["errors"].append("elastomer dims and counts need 3 components")
            return
        if any(n < 2 for n in elastomer.counts):
            result["errors"].append(f"elastomer counts must be >= 2 per axis (got {elastomer.counts})")
        if any(d <= 0 for d in elastomer.dims):
            result["errors"].append(f"elastomer dims must be positive (got {elastomer.dims})")
        if not 0 <= elastomer.n_fixed < elastomer.counts[2]:
            result["errors"].append(
                f"n_fixed must be in [0, {elastomer.counts[2]}) (got {elastomer.n_fixed})"
            )

    def check_grid(self, scene, result):
        grid = scene.grid
        if len(grid.resolution) != 3:
            result["errors"].append("grid resolution needs 3 components")
            return
        if min(grid.resolution) < MIN_GRID_NODES:
            result["errors"].append(
                f"grid resolution must be >= {MIN_GRID_NODES} per axis (got {grid.resolution})"
            )
            return
        if grid.edge <= 0:
            result["errors"].append(f"grid edge must be positive (got {grid.edge})")
            return

        dx = grid.node_spacing
        dims = np.asarray(scene.elastomer.dims, dtype=np.float64)
        lower_gel = np.array([-dims[0] / 2.0, -dims[1] / 2.0, 0.0])
        upper_gel = np.array([dims[0] / 2.0, dims[1] / 2.0, dims[2]])
        margin = self._margin_nodes(grid, lower_gel, upper_gel)
        if margin < GRID_MARGIN_NODES:
            result["errors"].append(
                f"grid must enclose the elastomer with >= {GRID_MARGIN_NODES:g} node spacings "
                f"of margin (got {margin:.2f})"
            )

        spacing = min(scene.elastomer.spacing)
        if dx > spacing:
            result["warnings"].append(
                f"grid spacing {dx:.3e} m exceeds the lattice spacing {spacing:.3e} m; "
                f"the surface will look coarse"
            )

    @staticmethod
    def _margin_nodes(grid, lower, upper):
        """Node spacings between a bounding box and the nearest grid face"""
        dx = grid.node_spacing
        origin = grid.resolved_origin()
        top = origin + (np.asarray(grid.resolution) - 1) * dx
        return min(((lower - origin) / dx).min(), ((top - upper) / dx).min())

    def check_indenter(self, scene, result, cloud=None):
        """
        Every press position must keep the placed indenter inside the grid

        Without a cloud only the tip (the lowest point, gap above the gel) is
        checked; with one, the whole placed cloud.
        """
        grid = scene.grid
        surface_z = float(scene.elastomer.dims[2])
        gap = float(scene.indenter.gap)
        worst = None
        for position_id, xy in scene.press.positions():
            pose = scene.indenter.to_pose(xy)
            if cloud is not None and len(cloud):
                placed = place_indenter(cloud, pose, surface_z=surface_z, gap=gap).positions
                lower, upper = placed.min(axis=0), placed.max(axis=0)
            else:
                lower = upper = np.array([pose.translation[0], pose.translation[1],
                                          surface_z + gap + pose.translation[2]])
            margin = self._margin_nodes(grid, lower, upper)
            if worst is None or margin < worst[1]:
                worst = (position_id, margin)
        if worst is not None and worst[1] < GRID_MARGIN_NODES:
            result["errors"].append(
                f"indenter at press position {worst[0]} is {worst[1]:.2f} node spacings from the grid "
                f"boundary; the grid margin needs >= {GRID_MARGIN_NODES:g}"
            )

    def check_time(self, scene, result):
        time = scene.time
        if time.dt <= 0:
            result["errors"].append(f"dt must be > 0 (got {time.dt})")
            return
        if time.n_substeps < 0:
            result["errors"].append(f"n_substeps must be >= 0 (got {time.n_substeps})")
            return
        if not 0 < time.cfl <= 1:
            result["errors"].append(f"cfl must be in (0, 1] (got {time.cfl})")
            return
        if time.damping < 0:
            result["errors"].append(f"damping must be >= 0 (got {time.damping})")
        if scene.material.validate() or scene.grid.edge <= 0:
            return

        dx = scene.grid.node_spacing
        needed = time.min_substeps(dx, scene.material)
        if time.n_substeps > 0 and time.n_substeps < needed:
            result["errors"].append(
                f"physics step dt/n_substeps = {time.dt / time.n_substeps:.3e} s violates the "
                f"CFL limit {time.cfl * dx / scene.material.wave_speed:.3e} s"
            )
            result["suggestions"].append(f"set time.n_substeps >= {needed} (or 0 for automatic)")
        elif time.n_substeps == 0:
            result["suggestions"].append(f"automatic substepping will use {needed} substeps per control step")

    def check_press(self, scene, result):
        press = scene.press
        depths = list(press.depths)
        if not depths:
            result["errors"].append("press depths must not be empty")
        elif any(d < 0 for d in depths):
            result["errors"].append(f"press depths must be non-negative (got {depths})")
        elif depths != sorted(depths):
            result["errors"].append("press depths must be sorted ascending")
        if press.speed <= 0:
            result["errors"].append(f"press speed must be > 0 (got {press.speed})")
        if len(press.grid_shape) != 2 or min(press.grid_shape) < 1:
            result["errors"].append(f"press grid_shape must be two positive integers (got {press.grid_shape})")
        if press.settle_steps < 0:
            result["errors"].append(f"settle_steps must be >= 0 (got {press.settle_steps})")
        result["errors"].extend(scene.indenter.validate())

    def check_render(self, scene, result):
        render = scene.render
        if list(render.image_shape) != [480, 640]:
            result["errors"].append(f"image_shape must be [480, 640] (got {render.image_shape})")
        if render.pixel_size <= 0:
            result["errors"].append(f"pixel_size must be > 0 (got {render.pixel_size})")
        for name in ("k_a", "k_d", "k_s"):
            if getattr(render, name) < 0:
                result["errors"].append(f"{name} must be >= 0 (got {getattr(render, name)})")
        if render.alpha < 1:
            result["errors"].append(f"alpha must be >= 1 (got {render.alpha})")
        if not render.lights:
            result["errors"].append("at least one light source is required")

        for index, light in enumerate(render.lights):
            if "direction" not in light:
                continue
            norm = float(np.linalg.norm(light["direction"]))
            if abs(norm - 1.0) > 1e-3:
                result["errors"].append(f"light {index} direction is not a unit vector (|L| = {norm:.4f})")
            elif norm != 1.0:
                result["warnings"].append(f"light {index} direction normalized (|L| = {norm:.6f})")

    def validate_scene_comprehensive(self, scene, indenter_cloud=None):
        """
        Comprehensive scene validation with detailed results

        indenter_cloud (object frame) extends the grid-margin check to the
        indenter at every press position.
        """
        result = {
            "errors": [],
            "warnings": [],
            "suggestions": [],
        }
        self.check_material(scene, result)
        self.check_elastomer(scene, result)
        if not result["errors"]:
            self.check_grid(scene, result)
        if not result["errors"] and not scene.indenter.validate() and len(scene.press.grid_shape) == 2:
            self.check_indenter(scene, result, indenter_cloud)
        self.check_time(scene, result)
        self.check_press(scene, result)
        self.check_render(scene, result)

        if result["errors"]:
            logger.debug(f"Scene validation failed: {result['errors']}")
        return result
