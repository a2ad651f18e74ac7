import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_state
from core import mpm_solver
from core.errors import OutOfGrid
from core.mpm_solver import Grid, MaterialTag
from reference_mpm import reference_step

DX = 1e-3
RES = 8

# positions >= 1 node spacing inside an 8^3 grid at the origin
interior = st.floats(min_value=1.0 * DX, max_value=(RES - 2) * DX, allow_nan=False)
position = st.tuples(interior, interior, interior)


def grid8():
    return Grid.allocate((RES,) * 3, DX, (0.0, 0.0, 0.0))


class TestBsplineWeights:
    def test_node_center_pattern(self):
        _, w = mpm_solver.bspline_weights((3 * DX, 3 * DX, 3 * DX), grid8())
        pattern = np.array([0.125, 0.75, 0.125])
        np.testing.assert_allclose(w, np.einsum("i,j,k->ijk", pattern, pattern, pattern), atol=1e-15)

    def test_midpoint_pattern(self):
        base, w = mpm_solver.bspline_weights((3.5 * DX, 3 * DX, 3 * DX), grid8())
        x_weights = w.sum(axis=(1, 2))
        np.testing.assert_allclose(x_weights, [0.5, 0.5, 0.0], atol=1e-15)
        assert base[0] == 3

    @settings(max_examples=1000, deadline=None)
    @given(position)
    def test_partition_of_unity(self, xp):
        _, w = mpm_solver.bspline_weights(xp, grid8())
        assert np.all(w >= 0)
        assert abs(w.sum() - 1.0) < 1e-12

    def test_outside_raises(self):
        with pytest.raises(OutOfGrid):
            mpm_solver.bspline_weights((0.2 * DX, 3 * DX, 3 * DX), grid8())


class TestParticleToGrid:
    def test_single_particle_at_rest(self):
        state = make_state([(3 * DX, 3 * DX, 3 * DX)])
        grid = mpm_solver.particle_to_grid(state)
        assert np.abs(grid.node_momentum).max() < 1e-18
        assert grid.node_mass.sum() == pytest.approx(state.mass[0], rel=1e-12)

    def test_center_node_momentum(self):
        state = make_state([(3 * DX, 3 * DX, 3 * DX)], velocities=[(1.0, 0.0, 0.0)])
        grid = mpm_solver.particle_to_grid(state)
        expected = 0.75 ** 3 * state.mass[0]
        assert grid.node_momentum[3, 3, 3, 0] == pytest.approx(expected, rel=1e-12)
        assert grid.node_momentum[3, 3, 3, 1] == 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=1, max_value=1000), st.integers(min_value=0, max_value=2 ** 31))
    def test_mass_and_momentum_conservation(self, n, seed):
        rng = np.random.default_rng(seed)
        positions = rng.uniform(1.0 * DX, (RES - 2) * DX, size=(n, 3))
        velocities = rng.normal(size=(n, 3))
        affine = rng.normal(scale=10.0, size=(n, 3, 3))
        mass = rng.uniform(0.5, 2.0, size=n) * 1e-7
        state = make_state(positions, velocities=velocities, affine=affine, mass=mass)
        grid = mpm_solver.particle_to_grid(state)

        assert grid.node_mass.min() >= 0.0
        assert grid.node_mass.sum() == pytest.approx(mass.sum(), rel=1e-10)
        expected = (mass[:, None] * velocities).sum(axis=0)
        total = grid.node_momentum.reshape(-1, 3).sum(axis=0)
        scale = np.abs(mass[:, None] * velocities).sum()
        np.testing.assert_allclose(total, expected, rtol=0, atol=1e-10 * scale)

    def test_colored_scatter_matches_serial(self):
        rng = np.random.default_rng(5)
        positions = rng.uniform(1.0 * DX, (RES - 2) * DX, size=(500, 3))
        velocities = rng.normal(size=(500, 3))
        serial = make_state(positions, velocities=velocities, deterministic=True)
        colored = make_state(positions, velocities=velocities, deterministic=False)
        a = mpm_solver.particle_to_grid(serial)
        b = mpm_solver.particle_to_grid(colored)
        np.testing.assert_allclose(b.node_mass, a.node_mass, rtol=1e-12, atol=0)
        np.testing.assert_allclose(b.node_momentum, a.node_momentum, rtol=1e-12, atol=1e-20)


class TestGridUpdate:
    def test_empty_node_has_zero_velocity(self):
        grid = grid8()
        grid.node_momentum[4, 4, 4] = (1.0, 2.0, 3.0)
        mpm_solver.grid_update(grid)
        assert np.all(grid.node_velocity[4, 4, 4] == 0.0)

    def test_division(self):
        grid = grid8()
        grid.node_mass[4, 4, 4] = 2.0
        grid.node_momentum[4, 4, 4] = (2.0, 0.0, 0.0)
        mpm_solver.grid_update(grid)
        np.testing.assert_array_equal(grid.node_velocity[4, 4, 4], [1.0, 0.0, 0.0])

    def test_walls_zero_normal_velocity(self):
        grid = grid8()
        grid.node_mass[:] = 1.0
        grid.node_momentum[:] = (1.0, 1.0, 1.0)
        mpm_solver.grid_update(grid)
        assert np.all(grid.node_velocity[0, :, :, 0] == 0.0)
        assert np.all(grid.node_velocity[:, -1, :, 1] == 0.0)
        assert np.all(grid.node_velocity[:, :, 0, 2] == 0.0)
        assert np.all(grid.node_velocity[3, 3, 0, :2] == 1.0)

    def test_matches_two_particle_division(self):
        state = make_state([(3 * DX, 3.2 * DX, 3 * DX), (3.6 * DX, 3 * DX, 3.3 * DX)],
                           velocities=[(0.3, -0.1, 0.2), (-0.5, 0.4, 0.0)])
        grid = mpm_solver.particle_to_grid(state)
        mass, momentum = grid.node_mass.copy(), grid.node_momentum.copy()
        mpm_solver.grid_update(grid)
        occupied = mass > 0
        np.testing.assert_allclose(grid.node_velocity[occupied], momentum[occupied] / mass[occupied][:, None],
                                   rtol=1e-14)


class TestGridToParticle:
    def interior_state(self, n=50, seed=0):
        rng = np.random.default_rng(seed)
        return make_state(rng.uniform(2.0 * DX, (RES - 3) * DX, size=(n, 3)))

    def fill(self, state, field):
        g = state.grid
        idx = np.stack(np.meshgrid(*(np.arange(r) for r in g.resolution), indexing="ij"), axis=-1)
        nodes = g.origin + idx * g.node_spacing
        g.node_velocity[:] = field(nodes)

    def test_uniform_field(self):
        state = self.interior_state()
        u = np.array([0.1, -0.2, 0.3])
        self.fill(state, lambda X: np.broadcast_to(u, X.shape))
        mpm_solver.grid_to_particle(state)
        np.testing.assert_allclose(state.velocities, np.broadcast_to(u, state.velocities.shape), atol=1e-14)
        np.testing.assert_allclose(state.affine, 0.0, atol=1e-9)

    def test_zero_field(self):
        state = self.interior_state()
        F_before = state.deformation.copy()
        mpm_solver.grid_to_particle(state)
        assert np.all(state.velocities == 0.0)
        assert np.all(state.affine == 0.0)
        np.testing.assert_array_equal(state.deformation, F_before)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 31))
    def test_linear_field_reproduction(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(3, 3))
        c = rng.normal(size=3)
        state = self.interior_state(seed=seed)
        self.fill(state, lambda X: c + X @ A.T)
        mpm_solver.grid_to_particle(state)
        np.testing.assert_allclose(state.velocities, c + state.positions @ A.T, atol=1e-9)
        np.testing.assert_allclose(state.affine, np.broadcast_to(A, state.affine.shape), atol=1e-6)

    def test_rigid_particles_skipped(self):
        state = self.interior_state(n=4)
        state.tags[:] = MaterialTag.INDENTER
        state.velocities[:] = 7.0
        self.fill(state, lambda X: np.ones_like(X))
        mpm_solver.grid_to_particle(state)
        assert np.all(state.velocities == 7.0)


class TestReferenceOracle:
    def scene_state(self, seed):
        rng = np.random.default_rng(seed)
        n_e, n_i = 80, 20
        elastomer = rng.uniform(2.5 * DX, 4.5 * DX, size=(n_e, 3))
        indenter = rng.uniform(2.5 * DX, 4.5 * DX, size=(n_i, 3))
        indenter[:, 2] += 0.8 * DX
        tags = np.full(n_e + n_i, MaterialTag.ELASTOMER, dtype=np.int8)
        tags[:10] = MaterialTag.ELASTOMER_BOTTOM
        tags[n_e:] = MaterialTag.INDENTER
        deformation = np.eye(3) + 0.02 * rng.normal(size=(n_e + n_i, 3, 3))
        deformation[n_e:] = np.eye(3)
        affine = rng.normal(scale=5.0, size=(n_e + n_i, 3, 3))
        affine[n_e:] = 0.0
        return make_state(
            np.vstack([elastomer, indenter]),
            velocities=rng.normal(scale=1e-2, size=(n_e + n_i, 3)),
            affine=affine,
            deformation=deformation,
            tags=tags,
            dt=2e-6,
        )

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_one_step_matches_reference(self, seed):
        state = self.scene_state(seed)
        v_ind = np.array([0.0, 0.0, -1e-3])
        x, v, C, F = reference_step(state, v_ind)
        mpm_solver.step(state, v_ind, n_substeps=1)

        for got, want in ((state.positions, x), (state.velocities, v), (state.affine, C), (state.deformation, F)):
            scale = np.abs(want).max()
            np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10 * scale)
