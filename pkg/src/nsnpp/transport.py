"""Nernst-Planck transport with Scharfetter-Gummel (exponentially fitted) fluxes.

The face flux of ``J = c v - D grad c`` with drift ``v = u - D z grad(phi)``
is taken from the exact solution of the 1D constant-drift problem between two
cell centres,

    F = (D/h) * (B(-P) c_L - B(P) c_R),    P = v h / D,   B(x) = x / (e^x - 1).

Walls carry no flux. The implicit update ``(I + dt L) c_new = c_old`` uses an
operator with nonpositive off-diagonals and zero column sums, so it preserves
both sign and total mass.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .mesh import GridSpec, MacVelocity, ScalarField, integrate
from .potential import Potential, Species
from .sparse import SolverError, SparseMatrix, bicgstab_solve

SLOTBOOM_LIMIT = 700.0


def bernoulli(x):
    """``B(x) = x / (exp(x) - 1)`` with ``B(0) = 1``; overflow-free for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-3
    pos = (x > 0) & ~small
    neg = (x < 0) & ~small
    xs = x[small]
    x2 = xs * xs
    out[small] = 1.0 - 0.5 * xs + x2 / 12.0 - x2 * x2 / 720.0
    xp = x[pos]
    out[pos] = xp * np.exp(-xp) / -np.expm1(-xp)
    xn = x[neg]
    out[neg] = xn / np.expm1(xn)
    return out if out.ndim else float(out)


def sg_face_flux(c_left, c_right, v, D, h):
    """Scharfetter-Gummel flux from the left cell to the right cell."""
    if D <= 0 or h <= 0:
        raise ValueError("D and h must be positive")
    P = np.asarray(v, dtype=float) * h / D
    return (D / h) * (bernoulli(-P) * c_left - bernoulli(P) * c_right)


@dataclass(frozen=True, eq=False)
class SpeciesFluxes:
    """Per-species face fluxes (per unit face length, signed along +x / +y).

    ``total_*`` include convection, ``drift_*`` hold the diffusion-migration part only.
    """

    total_x: list
    total_y: list
    drift_x: list
    drift_y: list


def _face_drifts(pot: Potential, u: MacVelocity | None, z: float, D: float):
    """Face drift velocities ``u - D z grad(phi)`` on interior faces."""
    vx = -D * z * pot.grad_x[1:-1]
    vy = -D * z * pot.grad_y[:, 1:-1]
    if u is not None:
        vx = vx + u.ux[1:-1]
        vy = vy + u.uy[:, 1:-1]
    return vx, vy


def _fluxes_for(c: np.ndarray, grid: GridSpec, vx, vy, D: float):
    fx = np.zeros((grid.nx + 1, grid.ny))
    fy = np.zeros((grid.nx, grid.ny + 1))
    fx[1:-1] = sg_face_flux(c[:-1], c[1:], vx, D, grid.dx)
    fy[:, 1:-1] = sg_face_flux(c[:, :-1], c[:, 1:], vy, D, grid.dy)
    return fx, fy


def compute_fluxes(c, pot: Potential, u: MacVelocity, species: Species) -> SpeciesFluxes:
    grid = pot.grid
    if len(c) != species.n:
        raise ValueError(f"expected {species.n} concentration fields, got {len(c)}")
    if u.grid != grid or any(ci.grid != grid for ci in c):
        raise ValueError("fields live on different grids")
    tx, ty, jx, jy = [], [], [], []
    for ci, z, D in zip(c, species.z, species.D):
        fx, fy = _fluxes_for(ci.values, grid, *_face_drifts(pot, u, z, D), D)
        tx.append(fx)
        ty.append(fy)
        fx, fy = _fluxes_for(ci.values, grid, *_face_drifts(pot, None, z, D), D)
        jx.append(fx)
        jy.append(fy)
    return SpeciesFluxes(tx, ty, jx, jy)


def flux_divergence(fx: np.ndarray, fy: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Cell-wise ``div J`` from face fluxes."""
    return np.diff(fx, axis=0) / grid.dx + np.diff(fy, axis=1) / grid.dy


def assemble_sg_operator(grid: GridSpec, vx: np.ndarray, vy: np.ndarray, D: float) -> SparseMatrix:
    """Matrix ``L`` with ``L c = div J(c)`` for frozen interior-face drifts."""
    idx = np.arange(grid.ncells).reshape(grid.shape)
    rows, cols, vals = [], [], []
    for left, right, v, h in ((idx[:-1, :], idx[1:, :], vx, grid.dx),
                              (idx[:, :-1], idx[:, 1:], vy, grid.dy)):
        P = (v * h / D).ravel()
        a = D / h ** 2 * bernoulli(-P)
        b = D / h ** 2 * bernoulli(P)
        l, r = left.ravel(), right.ravel()
        rows.extend([l, l, r, r])
        cols.extend([l, r, l, r])
        vals.extend([a, -b, -a, b])
    return SparseMatrix.from_triplets(np.concatenate(rows), np.concatenate(cols),
                                      np.concatenate(vals), grid.ncells)


def step_np_implicit(c, pot: Potential, u: MacVelocity, species: Species, dt: float,
                     tol: float = 1e-12, maxit: int | None = None, threads: int = 1):
    """One backward-Euler step of every species with ``phi`` and ``u`` frozen.

    BiCGSTAB runs unpreconditioned from ``c_old``: every Krylov direction of
    ``I + dt L`` then has zero sum, so the total mass is kept to rounding even
    before the residual tolerance is met. Species are independent and may be
    solved on ``threads`` workers; results do not depend on the thread count.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = pot.grid
    if len(c) != species.n:
        raise ValueError(f"expected {species.n} concentration fields, got {len(c)}")

    def solve_one(k):
        z, D = species.z[k], species.D[k]
        vx, vy = _face_drifts(pot, u, z, D)
        M = assemble_sg_operator(grid, vx, vy, D).scaled_add_identity(dt)
        b = c[k].values.ravel()
        x, rep = bicgstab_solve(M, b, x0=b, tol=tol, maxit=maxit, precondition=False)
        if not rep.converged:
            raise SolverError(f"transport solve for species {species.labels[k]} did not converge "
                              f"(residual {rep.residual:.3e})", rep)
        return ScalarField(grid, x.reshape(grid.shape))

    if threads > 1 and species.n > 1:
        with ThreadPoolExecutor(max_workers=min(threads, species.n)) as pool:
            return list(pool.map(solve_one, range(species.n)))
    return [solve_one(k) for k in range(species.n)]


def to_slotboom(c, phi: ScalarField, species: Species):
    """``zeta_i = c_i * exp(z_i * phi)``."""
    out = []
    for ci, z in zip(c, species.z):
        arg = z * phi.values
        if np.abs(arg).max(initial=0.0) > SLOTBOOM_LIMIT:
            raise OverflowError(f"|z*phi| exceeds {SLOTBOOM_LIMIT}; potential is unphysical")
        out.append(ScalarField(phi.grid, ci.values * np.exp(arg)))
    return out


def from_slotboom(zeta, phi: ScalarField, species: Species):
    out = []
    for zi, z in zip(zeta, species.z):
        arg = z * phi.values
        if np.abs(arg).max(initial=0.0) > SLOTBOOM_LIMIT:
            raise OverflowError(f"|z*phi| exceeds {SLOTBOOM_LIMIT}; potential is unphysical")
        out.append(ScalarField(phi.grid, zi.values * np.exp(-arg)))
    return out


def total_mass(c: ScalarField) -> float:
    return integrate(c)
