"""Incompressible flow on the MAC grid: Coulomb forcing, prediction, projection.

No-slip walls: wall-normal faces hold zero velocity, tangential components
use the reflected ghost value ``u_ghost = -u_interior``. The step is an
incremental pressure-correction scheme: the predictor carries the previous
pressure gradient, the projection solves a Neumann Poisson problem for the
increment.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import GridSpec, MacVelocity, ScalarField
from .potential import Potential, PhysParams, Species
from .sparse import SolverError, SparseMatrix, cg_solve


class PressureField(ScalarField):
    """Cell-centred pressure, always stored with zero spatial mean."""

    def __post_init__(self):
        super().__post_init__()
        vals = self.values - self.values.mean()
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True, eq=False)
class ForceField:
    grid: GridSpec
    fx: np.ndarray
    fy: np.ndarray

    def __post_init__(self):
        g = self.grid
        if self.fx.shape != (g.nx + 1, g.ny) or self.fy.shape != (g.nx, g.ny + 1):
            raise ValueError("force components do not match the MAC face shapes")
        if not (np.isfinite(self.fx).all() and np.isfinite(self.fy).all()):
            raise FloatingPointError("ForceField contains non-finite entries")


def log_mean(a, b):
    """Logarithmic mean ``(a - b) / (log a - log b)``, with ``L(a, a) = a`` and ``L(0, b) = 0``.

    Tiny negative inputs (solver round-off) are read as zero.
    """
    a = np.maximum(np.asarray(a, dtype=float), 0.0)
    b = np.maximum(np.asarray(b, dtype=float), 0.0)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    out = np.zeros(np.broadcast(a, b).shape)
    ok = lo > 0
    lo_ok, hi_ok = np.broadcast_to(lo, out.shape)[ok], np.broadcast_to(hi, out.shape)[ok]
    x = hi_ok / lo_ok - 1.0
    ratio = np.empty_like(x)
    small = x < 1e-4
    xs = x[small]
    ratio[small] = 1.0 + xs / 2.0 - xs ** 2 / 12.0 + xs ** 3 / 24.0
    ratio[~small] = x[~small] / np.log1p(x[~small])
    out[ok] = lo_ok * ratio
    return out if out.ndim else float(out)


def coulomb_force(c, pot: Potential, species: Species) -> ForceField:
    """Face values of ``-sum_j z_j c_j grad(phi)``.

    The face concentration is the logarithmic mean of the two neighbours. At a
    Boltzmann-distributed state this makes the force exactly the discrete
    gradient of ``sum_j c_j``, so equilibria carry no spurious currents.
    Wall faces use the adjacent cell value.
    """
    grid = pot.grid
    if len(c) != species.n or any(ci.grid != grid for ci in c):
        raise ValueError("concentration fields do not match the species or the grid")
    qx = np.zeros((grid.nx + 1, grid.ny))
    qy = np.zeros((grid.nx, grid.ny + 1))
    for ci, z in zip(c, species.z):
        if z == 0:
            continue
        v = ci.values
        qx[1:-1] += z * log_mean(v[:-1], v[1:])
        qy[:, 1:-1] += z * log_mean(v[:, :-1], v[:, 1:])
        qx[0] += z * v[0]
        qx[-1] += z * v[-1]
        qy[:, 0] += z * v[:, 0]
        qy[:, -1] += z * v[:, -1]
    return ForceField(grid, -qx * pot.grad_x, -qy * pot.grad_y)


def divergence(u: MacVelocity) -> ScalarField:
    g = u.grid
    return ScalarField(g, np.diff(u.ux, axis=0) / g.dx + np.diff(u.uy, axis=1) / g.dy)


def advection(u: MacVelocity):
    """First-order upwind ``(u . grad) u`` on interior faces (advective form)."""
    g = u.grid
    ux, uy = u.ux, u.uy
    ax = np.zeros_like(ux)
    ay = np.zeros_like(uy)

    # u_x on interior vertical faces
    U = ux[1:-1]
    V = 0.25 * (uy[:-1, :-1] + uy[1:, :-1] + uy[:-1, 1:] + uy[1:, 1:])
    back = (ux[1:-1] - ux[:-2]) / g.dx
    fwd = (ux[2:] - ux[1:-1]) / g.dx
    pad = np.concatenate([-ux[1:-1, :1], ux[1:-1], -ux[1:-1, -1:]], axis=1)
    back_y = (pad[:, 1:-1] - pad[:, :-2]) / g.dy
    fwd_y = (pad[:, 2:] - pad[:, 1:-1]) / g.dy
    ax[1:-1] = U * np.where(U > 0, back, fwd) + V * np.where(V > 0, back_y, fwd_y)

    # u_y on interior horizontal faces
    V = uy[:, 1:-1]
    U = 0.25 * (ux[:-1, :-1] + ux[1:, :-1] + ux[:-1, 1:] + ux[1:, 1:])
    back = (uy[:, 1:-1] - uy[:, :-2]) / g.dy
    fwd = (uy[:, 2:] - uy[:, 1:-1]) / g.dy
    pad = np.concatenate([-uy[:1, 1:-1], uy[:, 1:-1], -uy[-1:, 1:-1]], axis=0)
    back_x = (pad[1:-1] - pad[:-2]) / g.dx
    fwd_x = (pad[2:] - pad[1:-1]) / g.dx
    ay[:, 1:-1] = V * np.where(V > 0, back, fwd) + U * np.where(U > 0, back_x, fwd_x)
    return ax, ay


def _laplacian_1d_pairs(idx, axis):
    a = idx.take(range(idx.shape[axis] - 1), axis=axis).ravel()
    b = idx.take(range(1, idx.shape[axis]), axis=axis).ravel()
    return a, b


def _assemble_face_laplacian(shape, hx, hy, wall_axis):
    """Five-point Laplacian on a block of interior face unknowns.

    Along ``wall_axis`` the neighbours beyond the block are wall-normal faces
    (value 0); along the other axis they are reflected ghosts (value ``-u``).
    """
    n = shape[0] * shape[1]
    idx = np.arange(n).reshape(shape)
    diag = np.zeros(shape)
    rows, cols, vals = [], [], []
    for axis, h in ((0, hx), (1, hy)):
        w = 1.0 / h ** 2
        a, b = _laplacian_1d_pairs(idx, axis)
        rows.extend([a, b])
        cols.extend([b, a])
        vals.extend([np.full(a.size, w), np.full(a.size, w)])
        diag -= 2.0 * w
        if axis != wall_axis:
            first = [slice(None)] * 2
            last = [slice(None)] * 2
            first[axis] = 0
            last[axis] = -1
            diag[tuple(first)] -= w
            diag[tuple(last)] -= w
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    return SparseMatrix.from_triplets(np.concatenate(rows), np.concatenate(cols),
                                      np.concatenate(vals), n)


@lru_cache(maxsize=16)
def velocity_laplacians(grid: GridSpec):
    """Laplacians acting on interior ``u_x`` and ``u_y`` unknowns."""
    lx = _assemble_face_laplacian((grid.nx - 1, grid.ny), grid.dx, grid.dy, wall_axis=0)
    ly = _assemble_face_laplacian((grid.nx, grid.ny - 1), grid.dx, grid.dy, wall_axis=1)
    return lx, ly


@lru_cache(maxsize=16)
def _viscous_systems(grid: GridSpec, nu_dt: float):
    lx, ly = velocity_laplacians(grid)
    return lx.scaled_add_identity(-nu_dt), ly.scaled_add_identity(-nu_dt)


def velocity_laplacian(u: MacVelocity):
    """``lap(u)`` on interior faces (zero on wall-normal faces)."""
    g = u.grid
    lx, ly = velocity_laplacians(g)
    out_x = np.zeros_like(u.ux)
    out_y = np.zeros_like(u.uy)
    out_x[1:-1] = lx.matvec(u.ux[1:-1].ravel()).reshape(g.nx - 1, g.ny)
    out_y[:, 1:-1] = ly.matvec(u.uy[:, 1:-1].ravel()).reshape(g.nx, g.ny - 1)
    return out_x, out_y


def pressure_gradient(p: ScalarField):
    g = p.grid
    gx = np.zeros((g.nx + 1, g.ny))
    gy = np.zeros((g.nx, g.ny + 1))
    gx[1:-1] = np.diff(p.values, axis=0) / g.dx
    gy[:, 1:-1] = np.diff(p.values, axis=1) / g.dy
    return gx, gy


def ns_predict(u: MacVelocity, force: ForceField, params: PhysParams, dt: float,
               pressure: ScalarField | None = None, tol: float = 1e-12,
               advect: bool = True) -> MacVelocity:
    """Intermediate velocity from explicit advection and implicit viscosity.

    Solves ``rho (u* - u)/dt = -rho adv(u) + mu lap(u*) + f - grad(p)`` on
    interior faces; wall-normal faces stay zero.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = u.grid
    rhs_x = force.fx / params.rho
    rhs_y = force.fy / params.rho
    if advect:
        ax, ay = advection(u)
        rhs_x = rhs_x - ax
        rhs_y = rhs_y - ay
    if pressure is not None:
        px, py = pressure_gradient(pressure)
        rhs_x = rhs_x - px / params.rho
        rhs_y = rhs_y - py / params.rho
    bx = (u.ux + dt * rhs_x)[1:-1].ravel()
    by = (u.uy + dt * rhs_y)[:, 1:-1].ravel()
    Mx, My = _viscous_systems(g, params.mu / params.rho * dt)
    new_x = np.zeros_like(u.ux)
    new_y = np.zeros_like(u.uy)
    for M, b, x0, out, name in ((Mx, bx, u.ux[1:-1].ravel(), new_x, "x"),
                                (My, by, u.uy[:, 1:-1].ravel(), new_y, "y")):
        sol, rep = cg_solve(M, b, x0=x0, tol=tol)
        if not rep.converged:
            raise SolverError(f"viscous solve ({name}) did not converge (residual {rep.residual:.3e})", rep)
        if name == "x":
            out[1:-1] = sol.reshape(g.nx - 1, g.ny)
        else:
            out[:, 1:-1] = sol.reshape(g.nx, g.ny - 1)
    return MacVelocity(g, new_x, new_y)


@lru_cache(maxsize=16)
def neumann_laplacian(grid: GridSpec) -> SparseMatrix:
    """``-lap`` with homogeneous Neumann walls, per unit cell area (symmetric PSD)."""
    idx = np.arange(grid.ncells).reshape(grid.shape)
    rows, cols, vals = [], [], []
    for a, b, h in ((idx[:-1, :], idx[1:, :], grid.dx), (idx[:, :-1], idx[:, 1:], grid.dy)):
        a, b = a.ravel(), b.ravel()
        w = 1.0 / h ** 2
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([np.full(a.size, w), np.full(a.size, w), np.full(a.size, -w), np.full(a.size, -w)])
    return SparseMatrix.from_triplets(np.concatenate(rows), np.concatenate(cols),
                                      np.concatenate(vals), grid.ncells)


def solve_neumann_poisson(rhs: np.ndarray, grid: GridSpec, tol: float = 1e-12, x0=None) -> np.ndarray:
    """Mean-zero ``q`` with ``lap(q) = rhs`` (rhs is mean-centred first)."""
    b = -(rhs - rhs.mean()).ravel()
    x0 = None if x0 is None else np.asarray(x0, dtype=float).ravel()
    q, rep = cg_solve(neumann_laplacian(grid), b, x0=x0, tol=tol)
    if not rep.converged:
        raise SolverError(f"pressure Poisson solve did not converge (residual {rep.residual:.3e})", rep)
    q = q.reshape(grid.shape)
    return q - q.mean()


def project(u_star: MacVelocity, params: PhysParams, dt: float, tol: float = 1e-13):
    """Discrete Helmholtz projection. Returns ``(u, q)`` with ``u = u* - (dt/rho) grad q``."""
    g = u_star.grid
    if u_star.boundary_normal_max() != 0.0:
        raise ValueError("projection expects zero wall-normal velocity")
    div = divergence(u_star).values
    q = solve_neumann_poisson(params.rho / dt * div, g, tol)
    qx, qy = pressure_gradient(ScalarField(g, q))
    s = dt / params.rho
    return MacVelocity(g, u_star.ux - s * qx, u_star.uy - s * qy), PressureField(g, q)


def recover_pressure(state, species: Species, params: PhysParams, tol: float = 1e-12) -> PressureField:
    """Pressure from the gradient part of ``mu lap(u) - rho (u.grad)u + f``."""
    u = state.u
    g = u.grid
    force = coulomb_force(state.c, state.phi, species)
    lx, ly = velocity_laplacian(u)
    ax, ay = advection(u)
    gx = params.mu * lx - params.rho * ax + force.fx
    gy = params.mu * ly - params.rho * ay + force.fy
    gx[0] = gx[-1] = 0.0
    gy[:, 0] = gy[:, -1] = 0.0
    div = np.diff(gx, axis=0) / g.dx + np.diff(gy, axis=1) / g.dy
    return PressureField(g, solve_neumann_poisson(div, g, tol))


def velocity_l2(u: MacVelocity) -> float:
    """``||u||_2`` with each face owning a ``dx*dy`` dual cell."""
    a = u.grid.cell_area
    return float(np.sqrt(((u.ux ** 2).sum() + (u.uy ** 2).sum()) * a))


def velocity_grad_l2_sq(u: MacVelocity) -> float:
    """``||grad u||_2^2`` as the energy form of the discrete viscous operator."""
    g = u.grid
    ux, uy = u.ux, u.uy
    sx = (np.diff(ux, axis=0) ** 2).sum() * g.dy / g.dx
    inner = ux[1:-1]
    sx += ((np.diff(inner, axis=1) ** 2).sum() + 2.0 * (inner[:, 0] ** 2 + inner[:, -1] ** 2).sum()) * g.dx / g.dy
    sy = (np.diff(uy, axis=1) ** 2).sum() * g.dx / g.dy
    inner = uy[:, 1:-1]
    sy += ((np.diff(inner, axis=0) ** 2).sum() + 2.0 * (inner[0] ** 2 + inner[-1] ** 2).sum()) * g.dy / g.dx
    return float(sx + sy)
