"""
Numba kernels for the particle/grid transfers
- Quadratic B-spline stencil (node-centered, base = floor(x/dX - 0.5))
- Fixed-corotated stress map (parallel over particles)
- P2G scatter: serial (deterministic order) or x-slab colored (parallel, race free)
- G2P gather and grid velocity update (parallel, grid read-only)
"""

import numpy as np
from numba import njit, prange

# Kernel status codes written into per-particle status arrays
STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_OUT_OF_GRID = 2


@njit(cache=True)
def stencil(xp, origin, inv_dx, res, base, w):
    """Fill base[3] and w[3, 3] (axis, offset); False if the 3x3x3 block leaves the grid"""
    for a in range(3):
        xi = (xp[a] - origin[a]) * inv_dx
        b = int(np.floor(xi - 0.5))
        if b < 0 or b + 2 > res[a] - 1:
            return False
        base[a] = b
        fx = xi - b
        w[a, 0] = 0.5 * (1.5 - fx) ** 2
        w[a, 1] = 0.75 - (fx - 1.0) ** 2
        w[a, 2] = 0.5 * (fx - 0.5) ** 2
    return True


@njit(cache=True)
def det3(A):
    return (
        A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
        - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
        + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0])
    )


@njit(cache=True)
def corotated_stress(Fp, mu, lam, out):
    """out = 2μ(F - R)F^T + λ(J - 1)J I; returns J"""
    J = det3(Fp)
    if J <= 0.0:
        return J
    U, sig, Vt = np.linalg.svd(Fp)
    # reflection correction so that R is a proper rotation
    if det3(U) < 0.0:
        for i in range(3):
            U[i, 2] = -U[i, 2]
    if det3(Vt) < 0.0:
        for j in range(3):
            Vt[2, j] = -Vt[2, j]
    R = U @ Vt
    D = Fp - R
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += D[i, k] * Fp[j, k]
            out[i, j] = 2.0 * mu * acc
        out[i, i] += lam * (J - 1.0) * J
    return J


@njit(parallel=True, cache=True)
def compute_affine(C, F, mass, vol0, tag, rigid_tag, dt, inv_dx, mu, lam, affine, status):
    """affine_p = -dt 4/dX^2 V0_p S_p + m_p C_p (rigid particles carry no stress)"""
    n = F.shape[0]
    scale = -dt * 4.0 * inv_dx * inv_dx
    for p in prange(n):
        status[p] = STATUS_OK
        S = np.zeros((3, 3))
        if tag[p] != rigid_tag:
            J = corotated_stress(F[p], mu, lam, S)
            if J <= 0.0:
                status[p] = STATUS_DEGENERATE
        for i in range(3):
            for j in range(3):
                affine[p, i, j] = scale * vol0[p] * S[i, j] + mass[p] * C[p, i, j]


@njit(cache=True)
def scatter_particle(p, x, v, mass, affine, origin, dx, res, grid_m, grid_mv, base, w):
    inv_dx = 1.0 / dx
    if not stencil(x[p], origin, inv_dx, res, base, w):
        return False
    mp = mass[p]
    for i in range(3):
        gi = base[0] + i
        d0 = origin[0] + gi * dx - x[p, 0]
        for j in range(3):
            gj = base[1] + j
            d1 = origin[1] + gj * dx - x[p, 1]
            wij = w[0, i] * w[1, j]
            for k in range(3):
                gk = base[2] + k
                d2 = origin[2] + gk * dx - x[p, 2]
                weight = wij * w[2, k]
                grid_m[gi, gj, gk] += weight * mp
                for a in range(3):
                    grid_mv[gi, gj, gk, a] += weight * (
                        mp * v[p, a]
                        + affine[p, a, 0] * d0
                        + affine[p, a, 1] * d1
                        + affine[p, a, 2] * d2
                    )
    return True


@njit(cache=True)
def p2g_serial(x, v, mass, affine, origin, dx, res, grid_m, grid_mv):
    """Scatter in particle index order; returns the first bad particle or -1"""
    base = np.empty(3, dtype=np.int64)
    w = np.empty((3, 3))
    for p in range(x.shape[0]):
        if not scatter_particle(p, x, v, mass, affine, origin, dx, res, grid_m, grid_mv, base, w):
            return p
    return -1


@njit(parallel=True, cache=True)
def p2g_colored(order, slab_ptr, x, v, mass, affine, origin, dx, res, grid_m, grid_mv, status):
    """
    Race-free parallel scatter

    Particles are bucketed by the x index of their stencil base (slab s touches
    node planes s..s+2). Slabs with equal s mod 3 never share a node plane, so
    each color runs its slabs in parallel; colors run one after another.
    """
    n_slabs = slab_ptr.shape[0] - 1
    for color in range(3):
        n_color = (n_slabs - color + 2) // 3
        for t in prange(n_color):
            s = color + 3 * t
            base = np.empty(3, dtype=np.int64)
            w = np.empty((3, 3))
            for q in range(slab_ptr[s], slab_ptr[s + 1]):
                p = order[q]
                if not scatter_particle(p, x, v, mass, affine, origin, dx, res, grid_m, grid_mv, base, w):
                    status[p] = STATUS_OUT_OF_GRID


@njit(parallel=True, cache=True)
def grid_velocity(grid_m, grid_mv, grid_v, gravity_dv, damping_factor):
    """V_i = MG_i / M_i where M_i > 0, else 0"""
    nx, ny, nz = grid_m.shape
    for i in prange(nx):
        for j in range(ny):
            for k in range(nz):
                m = grid_m[i, j, k]
                if m > 0.0:
                    for a in range(3):
                        grid_v[i, j, k, a] = (grid_mv[i, j, k, a] / m + gravity_dv[a]) * damping_factor
                else:
                    for a in range(3):
                        grid_v[i, j, k, a] = 0.0


@njit(parallel=True, cache=True)
def g2p(x, v, C, F, tag, rigid_tag, grid_v, origin, dx, res, dt, J, status):
    """Gather v_p, C_p from the grid and update F_p = (I + dt C_p) F_p"""
    n = x.shape[0]
    inv_dx = 1.0 / dx
    c_scale = 4.0 * inv_dx * inv_dx
    for p in prange(n):
        status[p] = STATUS_OK
        if tag[p] == rigid_tag:
            J[p] = 1.0
            continue
        base = np.empty(3, dtype=np.int64)
        w = np.empty((3, 3))
        if not stencil(x[p], origin, inv_dx, res, base, w):
            status[p] = STATUS_OUT_OF_GRID
            continue

        nv = np.zeros(3)
        nC = np.zeros((3, 3))
        for i in range(3):
            gi = base[0] + i
            d0 = origin[0] + gi * dx - x[p, 0]
            for j in range(3):
                gj = base[1] + j
                d1 = origin[1] + gj * dx - x[p, 1]
                wij = w[0, i] * w[1, j]
                for k in range(3):
                    gk = base[2] + k
                    d2 = origin[2] + gk * dx - x[p, 2]
                    weight = wij * w[2, k]
                    for a in range(3):
                        gv = grid_v[gi, gj, gk, a]
                        nv[a] += weight * gv
                        nC[a, 0] += c_scale * weight * gv * d0
                        nC[a, 1] += c_scale * weight * gv * d1
                        nC[a, 2] += c_scale * weight * gv * d2

        Fn = np.zeros((3, 3))
        for a in range(3):
            for b in range(3):
                acc = F[p, a, b]
                for k in range(3):
                    acc += dt * nC[a, k] * F[p, k, b]
                Fn[a, b] = acc
        for a in range(3):
            v[p, a] = nv[a]
            for b in range(3):
                C[p, a, b] = nC[a, b]
                F[p, a, b] = Fn[a, b]
        J[p] = det3(Fn)
