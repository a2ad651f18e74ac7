"""
MPM solver for the sensor elastomer and rigid indenters
- State initialization (F = I, C = 0)
- Particle-to-grid, grid update, grid-to-particle, boundary rules, advection
- Serial (bit-exact) and colored parallel scatter modes
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from core import kernels
from core.errors import DegenerateF, EmptyScene, GridTooSmall, OutOfGrid
from core.material import MaterialParams

logger = logging.getLogger(__name__)

# particles must stay this many node spacings inside the grid extent
INIT_MARGIN_NODES = 2.0
ADVECT_MARGIN_NODES = 1.0


class MaterialTag(IntEnum):
    ELASTOMER = 0
    ELASTOMER_BOTTOM = 1
    INDENTER = 2


@dataclass(frozen=True)
class Particle:
    """Snapshot of one material point"""

    position: np.ndarray
    velocity: np.ndarray
    affine_velocity: np.ndarray
    deformation_gradient: np.ndarray
    mass: float
    rest_volume: float
    tag: MaterialTag


@dataclass
class Grid:
    """Fixed background lattice of nodes at origin + index * node_spacing"""

    resolution: np.ndarray
    node_spacing: float
    origin: np.ndarray
    node_mass: np.ndarray
    node_momentum: np.ndarray
    node_velocity: np.ndarray

    @classmethod
    def allocate(cls, resolution, node_spacing, origin):
        res = np.asarray(resolution, dtype=np.int64).reshape(3)
        shape = tuple(int(n) for n in res)
        return cls(
            resolution=res,
            node_spacing=float(node_spacing),
            origin=np.asarray(origin, dtype=np.float64).reshape(3).copy(),
            node_mass=np.zeros(shape),
            node_momentum=np.zeros(shape + (3,)),
            node_velocity=np.zeros(shape + (3,)),
        )

    @property
    def extent(self):
        """(lower corner, upper corner) of the node lattice, meters"""
        upper = self.origin + (self.resolution - 1) * self.node_spacing
        return self.origin.copy(), upper

    def node_position(self, i, j, k):
        return self.origin + np.array([i, j, k], dtype=np.float64) * self.node_spacing

    def zero(self):
        self.node_mass.fill(0.0)
        self.node_momentum.fill(0.0)
        self.node_velocity.fill(0.0)

    def margin_nodes(self, positions):
        """Smallest distance (in node spacings) from any position to the grid extent"""
        rel = (np.asarray(positions) - self.origin) / self.node_spacing
        lower = rel.min()
        upper = ((self.resolution - 1) - rel).min()
        return float(min(lower, upper))


@dataclass
class SimState:
    """All particle arrays plus the grid; elastomer particles come first"""

    positions: np.ndarray
    velocities: np.ndarray
    affine: np.ndarray
    deformation: np.ndarray
    mass: np.ndarray
    rest_volume: np.ndarray
    tags: np.ndarray
    grid: Grid
    material: MaterialParams
    dt: float
    step_count: int = 0
    n_substeps: int = 1
    deterministic: bool = True
    gravity: Optional[np.ndarray] = None
    damping: float = 0.0
    # top-surface lattice bookkeeping for depth extraction
    surface_index: Optional[np.ndarray] = None
    surface_x: Optional[np.ndarray] = None
    surface_y: Optional[np.ndarray] = None
    surface_z0: float = 0.0
    # per-particle scratch
    last_det: np.ndarray = field(default=None, repr=False)
    _affine_work: np.ndarray = field(default=None, repr=False)
    _status: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n = self.positions.shape[0]
        if self.last_det is None:
            self.last_det = np.ones(n)
        self._affine_work = np.zeros((n, 3, 3))
        self._status = np.zeros(n, dtype=np.int8)
        self.indenter_index = np.flatnonzero(self.tags == MaterialTag.INDENTER)
        self.bottom_index = np.flatnonzero(self.tags == MaterialTag.ELASTOMER_BOTTOM)
        self.elastomer_mask = self.tags != MaterialTag.INDENTER

    @property
    def n_particles(self):
        return int(self.positions.shape[0])

    @property
    def n_elastomer(self):
        return int(self.elastomer_mask.sum())

    def particle(self, index):
        return Particle(
            position=self.positions[index].copy(),
            velocity=self.velocities[index].copy(),
            affine_velocity=self.affine[index].copy(),
            deformation_gradient=self.deformation[index].copy(),
            mass=float(self.mass[index]),
            rest_volume=float(self.rest_volume[index]),
            tag=MaterialTag(int(self.tags[index])),
        )

    def copy(self):
        """Deep copy (grid included) for branching experiments"""
        grid = Grid(
            resolution=self.grid.resolution.copy(),
            node_spacing=self.grid.node_spacing,
            origin=self.grid.origin.copy(),
            node_mass=self.grid.node_mass.copy(),
            node_momentum=self.grid.node_momentum.copy(),
            node_velocity=self.grid.node_velocity.copy(),
        )
        return SimState(
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            affine=self.affine.copy(),
            deformation=self.deformation.copy(),
            mass=self.mass.copy(),
            rest_volume=self.rest_volume.copy(),
            tags=self.tags.copy(),
            grid=grid,
            material=self.material,
            dt=self.dt,
            step_count=self.step_count,
            n_substeps=self.n_substeps,
            deterministic=self.deterministic,
            gravity=None if self.gravity is None else self.gravity.copy(),
            damping=self.damping,
            surface_index=self.surface_index,
            surface_x=self.surface_x,
            surface_y=self.surface_y,
            surface_z0=self.surface_z0,
            last_det=self.last_det.copy(),
        )

    def snapshot(self):
        """Particle-side state only; the grid is rebuilt by every P2G"""
        return (
            self.positions.copy(),
            self.velocities.copy(),
            self.affine.copy(),
            self.deformation.copy(),
            self.last_det.copy(),
            self.step_count,
        )

    def restore(self, snapshot):
        positions, velocities, affine, deformation, last_det, step_count = snapshot
        self.positions[:] = positions
        self.velocities[:] = velocities
        self.affine[:] = affine
        self.deformation[:] = deformation
        self.last_det[:] = last_det
        self.step_count = step_count


def _particle_volume(particle_set, fallback):
    volume = particle_set.volume
    count = len(particle_set)
    if volume <= 0.0:
        logger.warning(
            f"Particle set '{particle_set.source}' has a flat bounding box; "
            f"using one grid cell per particle as its rest volume"
        )
        return fallback
    return volume / count


def init_scene(config, elastomer, indenter, indenter_velocity=None):
    """
    Build the initial SimState

    Args:
        config: SceneConfig (grid, material and time sections are read)
        elastomer: lattice ParticleSet (tags per point, bottom layers fixed)
        indenter: ParticleSet already placed in world coordinates
        indenter_velocity: initial commanded indenter velocity, m/s

    Returns:
        SimState with F = I, C = 0 everywhere
    """
    if elastomer is None or len(elastomer) == 0:
        raise EmptyScene("Elastomer particle set is empty")
    if indenter is None or len(indenter) == 0:
        raise EmptyScene("Indenter particle set is empty")

    material = config.material
    dx = config.grid.node_spacing
    grid = Grid.allocate(config.grid.resolution, dx, config.grid.resolved_origin())

    positions = np.vstack([elastomer.positions, indenter.positions]).astype(np.float64)
    margin = grid.margin_nodes(positions)
    if margin < INIT_MARGIN_NODES:
        lower, upper = grid.extent
        raise GridTooSmall(
            f"Particles are {margin:.2f} node spacings from the grid boundary "
            f"(need >= {INIT_MARGIN_NODES}); grid extent {lower} .. {upper}, "
            f"particle box {positions.min(axis=0)} .. {positions.max(axis=0)}"
        )

    n_e = len(elastomer)
    n_i = len(indenter)
    n = n_e + n_i

    vol0 = np.empty(n)
    vol0[:n_e] = _particle_volume(elastomer, dx ** 3)
    vol0[n_e:] = _particle_volume(indenter, dx ** 3)
    mass = material.density * vol0

    tags = np.empty(n, dtype=np.int8)
    tags[:n_e] = elastomer.tag_array()
    tags[n_e:] = MaterialTag.INDENTER

    velocities = np.zeros((n, 3))
    if indenter_velocity is not None:
        velocities[n_e:] = np.asarray(indenter_velocity, dtype=np.float64).reshape(3)

    deformation = np.tile(np.eye(3), (n, 1, 1))
    affine = np.zeros((n, 3, 3))

    dt, n_substeps = config.time.physics_step(dx, material)
    gravity = np.array([0.0, 0.0, -9.81]) if config.time.gravity else None

    state = SimState(
        positions=positions,
        velocities=velocities,
        affine=affine,
        deformation=deformation,
        mass=mass,
        rest_volume=vol0,
        tags=tags,
        grid=grid,
        material=material,
        dt=dt,
        n_substeps=n_substeps,
        deterministic=bool(config.deterministic),
        gravity=gravity,
        damping=float(config.time.damping),
    )

    if elastomer.surface_index is not None:
        state.surface_index = elastomer.surface_index
        top = positions[elastomer.surface_index]
        state.surface_x = top[:, 0, 0].copy()
        state.surface_y = top[0, :, 1].copy()
        state.surface_z0 = float(top[..., 2].mean())

    logger.info(
        f"Scene initialized: {n_e} elastomer + {n_i} indenter particles, "
        f"grid {tuple(int(r) for r in grid.resolution)} dX={dx:.4e} m, "
        f"dt={dt:.3e} s x {n_substeps} substeps"
    )
    return state


def bspline_weights(x_p, grid):
    """
    Quadratic B-spline stencil of one position

    Returns:
        (base node index (3,), 3x3x3 weights) with weights summing to 1
    """
    base = np.empty(3, dtype=np.int64)
    w = np.empty((3, 3))
    xp = np.asarray(x_p, dtype=np.float64).reshape(3)
    ok = kernels.stencil(xp, grid.origin, 1.0 / grid.node_spacing, grid.resolution, base, w)
    if not ok:
        raise OutOfGrid(f"Stencil of position {xp} leaves the grid")
    return base, np.einsum("i,j,k->ijk", w[0], w[1], w[2])


def _raise_for_status(state, context):
    status = state._status
    bad = np.flatnonzero(status != kernels.STATUS_OK)
    if bad.size == 0:
        return
    p = int(bad[0])
    if status[p] == kernels.STATUS_DEGENERATE:
        raise DegenerateF(f"{context}: particle {p} has det(F) <= 0")
    raise OutOfGrid(f"{context}: particle {p} at {state.positions[p]} left the grid")


def particle_to_grid(state):
    """Zero the grid, then scatter mass and momentum (APIC + stress impulse)"""
    grid = state.grid
    grid.zero()
    inv_dx = 1.0 / grid.node_spacing
    kernels.compute_affine(
        state.affine, state.deformation, state.mass, state.rest_volume,
        state.tags, np.int8(MaterialTag.INDENTER), state.dt, inv_dx,
        state.material.mu, state.material.lam, state._affine_work, state._status,
    )
    _raise_for_status(state, "stress")

    if state.deterministic:
        bad = kernels.p2g_serial(
            state.positions, state.velocities, state.mass, state._affine_work,
            grid.origin, grid.node_spacing, grid.resolution,
            grid.node_mass, grid.node_momentum,
        )
        if bad >= 0:
            raise OutOfGrid(f"particle-to-grid: particle {bad} at {state.positions[bad]} left the grid")
    else:
        base_x = np.floor((state.positions[:, 0] - grid.origin[0]) * inv_dx - 0.5).astype(np.int64)
        n_slabs = int(grid.resolution[0])
        if base_x.min() < 0 or base_x.max() > n_slabs - 3:
            raise OutOfGrid("particle-to-grid: a particle stencil left the grid along x")
        order = np.argsort(base_x, kind="stable")
        slab_ptr = np.searchsorted(base_x[order], np.arange(n_slabs + 1), side="left").astype(np.int64)
        state._status.fill(kernels.STATUS_OK)
        kernels.p2g_colored(
            order, slab_ptr, state.positions, state.velocities, state.mass,
            state._affine_work, grid.origin, grid.node_spacing, grid.resolution,
            grid.node_mass, grid.node_momentum, state._status,
        )
        _raise_for_status(state, "particle-to-grid")
    return grid


def grid_update(grid, dt=0.0, gravity=None, damping=0.0, walls=True):
    """
    Node velocities V_i = MG_i / M_i (0 on empty nodes)

    Optional gravity / damping act on occupied nodes only; walls zero the normal
    velocity component on the six boundary faces.
    """
    gravity_dv = np.zeros(3) if gravity is None else np.asarray(gravity, dtype=np.float64) * dt
    damping_factor = float(np.exp(-damping * dt)) if damping > 0.0 else 1.0
    kernels.grid_velocity(grid.node_mass, grid.node_momentum, grid.node_velocity, gravity_dv, damping_factor)

    if walls:
        v = grid.node_velocity
        v[0, :, :, 0] = 0.0
        v[-1, :, :, 0] = 0.0
        v[:, 0, :, 1] = 0.0
        v[:, -1, :, 1] = 0.0
        v[:, :, 0, 2] = 0.0
        v[:, :, -1, 2] = 0.0
    return grid


def grid_to_particle(state):
    """Gather v, C and update F for every non-rigid particle"""
    grid = state.grid
    kernels.g2p(
        state.positions, state.velocities, state.affine, state.deformation,
        state.tags, np.int8(MaterialTag.INDENTER), grid.node_velocity,
        grid.origin, grid.node_spacing, grid.resolution, state.dt,
        state.last_det, state._status,
    )
    _raise_for_status(state, "grid-to-particle")
    return state


def apply_boundary(state, indenter_velocity):
    """Indenter particles share the commanded velocity; bottom layers are held still"""
    velocity = np.asarray(indenter_velocity, dtype=np.float64).reshape(3)
    idx = state.indenter_index
    state.velocities[idx] = velocity
    state.affine[idx] = 0.0
    state.deformation[idx] = np.eye(3)
    state.velocities[state.bottom_index] = 0.0
    return state


def advect(state):
    """x_p += dt v_p; raises OutOfGrid if a particle leaves the safe margin"""
    new_positions = state.positions + state.dt * state.velocities
    margin = state.grid.margin_nodes(new_positions)
    if margin < ADVECT_MARGIN_NODES:
        raise OutOfGrid(
            f"Advection would move a particle to {margin:.2f} node spacings from the "
            f"grid boundary at step {state.step_count}; check scene size and timestep"
        )
    state.positions[:] = new_positions
    state.step_count += 1
    return state


def check_deformation(state):
    """det(F) > 0 for every elastomer particle"""
    dets = state.last_det[state.elastomer_mask]
    if dets.size and dets.min() <= 0.0:
        p = int(np.flatnonzero(state.elastomer_mask)[np.argmin(dets)])
        raise DegenerateF(f"Elastomer particle {p} inverted (det(F) = {dets.min():.3e}) at step {state.step_count}")


def step(state, indenter_velocity, n_substeps=None):
    """
    Advance n_substeps physics steps under a fixed indenter velocity

    Each substep: zero grid -> P2G -> grid update -> G2P -> boundary -> advect.
    """
    if n_substeps is None:
        n_substeps = state.n_substeps
    velocity = np.asarray(indenter_velocity, dtype=np.float64).reshape(3)

    for _ in range(int(n_substeps)):
        particle_to_grid(state)
        grid_update(state.grid, state.dt, state.gravity, state.damping)
        grid_to_particle(state)
        check_deformation(state)
        apply_boundary(state, velocity)
        advect(state)

    logger.debug(f"step {state.step_count}: indenter v={velocity}")
    return state
