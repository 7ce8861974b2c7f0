"""Electrostatic potential with a capacitor-type Robin wall condition.

Solves ``-eps * lap(phi) = sum_j z_j c_j`` in the box with
``d(phi)/dn + tau * phi = xi`` on the walls, using a cell-centred five-point
stencil integrated over each cell (the system is the cell-wise flux balance,
which keeps the residual tolerance attainable on fine grids). The wall flux
is closed without ghost cells: the face value is
eliminated from the half-cell difference and the Robin relation,

    phi_face = (phi_cell + (h/2) xi) / (1 + (h/2) tau),

which keeps the matrix symmetric positive definite.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import BoundaryTrace, GridSpec, ScalarField
from .sparse import SolveReport, SolverError, SparseMatrix, cg_solve


@dataclass(frozen=True)
class PhysParams:
    """Material constants; all default to one."""

    eps: float = 1.0
    tau: float = 1.0
    rho: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        for name in ("eps", "tau", "rho", "mu"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val}")


@dataclass(frozen=True)
class Species:
    """Charge numbers, diffusivities and labels of the dissolved species."""

    z: tuple
    D: tuple
    labels: tuple = ()

    def __post_init__(self):
        z = tuple(float(v) for v in self.z)
        D = tuple(float(v) for v in self.D)
        if len(z) < 1 or len(z) != len(D):
            raise ValueError("need at least one species and matching z/D lengths")
        for k, d in enumerate(D):
            if not (np.isfinite(d) and d > 0):
                raise ValueError(f"species {k}: diffusivity must be positive, got {d}")
        labels = tuple(self.labels) or tuple(f"c{k + 1}" for k in range(len(z)))
        if len(labels) != len(z):
            raise ValueError("labels length does not match number of species")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.z)

    def __len__(self):
        return len(self.z)


@dataclass(frozen=True, eq=False)
class Potential:
    """Potential with its face gradients, wall trace and solve report.

    ``grad_x``/``grad_y`` have MAC face shapes. Interior entries are centred
    differences; wall entries are the discrete Robin normal derivative
    (signed along +x / +y).
    """

    phi: ScalarField
    grad_x: np.ndarray
    grad_y: np.ndarray
    trace: BoundaryTrace
    normal_derivative: BoundaryTrace
    report: SolveReport | None = None

    @property
    def grid(self) -> GridSpec:
        return self.phi.grid


def charge_density(c, species: Species) -> ScalarField:
    if len(c) != species.n:
        raise ValueError(f"expected {species.n} concentration fields, got {len(c)}")
    grid = c[0].grid
    rho = np.zeros(grid.shape)
    for ci, zi in zip(c, species.z):
        if ci.grid != grid:
            raise ValueError("concentration fields live on different grids")
        rho += zi * ci.values
    return ScalarField(grid, rho)


def _robin_wall_coefficients(grid: GridSpec, tau: float):
    """Per-edge factor ``1 / (h (1 + h tau / 2))`` multiplying eps*tau (matrix) and eps*xi (rhs)."""
    return {e: 1.0 / (grid.normal_spacing(e) * (1.0 + 0.5 * grid.normal_spacing(e) * tau))
            for e in ("bottom", "top", "left", "right")}


def _edge_cells(grid: GridSpec, edge: str) -> np.ndarray:
    """Flat indices of cells adjacent to an edge, ordered by arc length."""
    idx = np.arange(grid.ncells).reshape(grid.shape)
    return {"bottom": idx[:, 0], "top": idx[:, -1], "left": idx[0, :], "right": idx[-1, :]}[edge]


@lru_cache(maxsize=32)
def assemble_robin_laplacian(grid: GridSpec, params: PhysParams) -> SparseMatrix:
    """Discrete ``-eps * lap`` with the Robin closure, integrated over each cell."""
    nx, ny = grid.shape
    idx = np.arange(grid.ncells).reshape(grid.shape)
    rows, cols, vals = [], [], []

    def couple(a, b, w):
        a, b = a.ravel(), b.ravel()
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([np.full(a.size, w), np.full(a.size, w), np.full(a.size, -w), np.full(a.size, -w)])

    couple(idx[:-1, :], idx[1:, :], params.eps / grid.dx ** 2)
    couple(idx[:, :-1], idx[:, 1:], params.eps / grid.dy ** 2)
    wall = _robin_wall_coefficients(grid, params.tau)
    for edge, k in wall.items():
        cells = _edge_cells(grid, edge)
        rows.append(cells)
        cols.append(cells)
        vals.append(np.full(cells.size, params.eps * params.tau * k))
    return SparseMatrix.from_triplets(np.concatenate(rows), np.concatenate(cols),
                                      grid.cell_area * np.concatenate(vals), nx * ny)


def robin_rhs(charge: np.ndarray, xi: BoundaryTrace, params: PhysParams) -> np.ndarray:
    """Right-hand side matching :func:`assemble_robin_laplacian`."""
    grid = xi.grid
    b = np.array(charge, dtype=float).reshape(grid.shape).copy()
    wall = _robin_wall_coefficients(grid, params.tau)
    b[:, 0] += params.eps * wall["bottom"] * xi.bottom
    b[:, -1] += params.eps * wall["top"] * xi.top
    b[0, :] += params.eps * wall["left"] * xi.left
    b[-1, :] += params.eps * wall["right"] * xi.right
    return grid.cell_area * b.ravel()


def potential_from_values(phi: np.ndarray, xi: BoundaryTrace, params: PhysParams,
                          report: SolveReport | None = None) -> Potential:
    """Attach face gradients and the wall trace to cell values of phi."""
    grid = xi.grid
    phi = np.asarray(phi, dtype=float).reshape(grid.shape)
    tau = params.tau
    cell = {"bottom": phi[:, 0], "top": phi[:, -1], "left": phi[0, :], "right": phi[-1, :]}
    trace, dn = {}, {}
    for edge, pc in cell.items():
        h2 = 0.5 * grid.normal_spacing(edge)
        xe = getattr(xi, edge)
        trace[edge] = (pc + h2 * xe) / (1.0 + h2 * tau)
        dn[edge] = (xe - tau * pc) / (1.0 + h2 * tau)
    gx = np.empty((grid.nx + 1, grid.ny))
    gy = np.empty((grid.nx, grid.ny + 1))
    gx[1:-1] = np.diff(phi, axis=0) / grid.dx
    gy[:, 1:-1] = np.diff(phi, axis=1) / grid.dy
    gx[0], gx[-1] = -dn["left"], dn["right"]
    gy[:, 0], gy[:, -1] = -dn["bottom"], dn["top"]
    return Potential(ScalarField(grid, phi), gx, gy, BoundaryTrace(grid, **trace),
                     BoundaryTrace(grid, **dn), report)


def solve_potential_from_charge(charge: np.ndarray, xi: BoundaryTrace, params: PhysParams,
                                tol: float = 1e-12, x0=None) -> Potential:
    grid = xi.grid
    A = assemble_robin_laplacian(grid, params)
    b = robin_rhs(charge, xi, params)
    x0 = None if x0 is None else np.asarray(x0, dtype=float).ravel()
    phi, rep = cg_solve(A, b, x0=x0, tol=tol)
    if not rep.converged:
        raise SolverError(f"Robin-Poisson solve did not converge (residual {rep.residual:.3e})", rep)
    return potential_from_values(phi, xi, params, rep)


def solve_potential(c, xi: BoundaryTrace, species: Species, params: PhysParams,
                    tol: float = 1e-12, x0=None) -> Potential:
    """Potential generated by the concentrations ``c`` and wall data ``xi``.

    ``x0`` (cell values) warm-starts the CG iteration.
    """
    rho = charge_density(c, species)
    if rho.grid != xi.grid:
        raise ValueError("wall data and concentrations live on different grids")
    return solve_potential_from_charge(rho.values, xi, params, tol, x0)


def split_potential(c, xi: BoundaryTrace, species: Species, params: PhysParams,
                    tol: float = 1e-12):
    """Return ``(phi1, phi2)``: wall-driven part (no charge) and charge-driven part (zero wall data)."""
    grid = xi.grid
    phi1 = solve_potential_from_charge(np.zeros(grid.shape), xi, params, tol)
    phi2 = solve_potential_from_charge(charge_density(c, species).values,
                                       BoundaryTrace.constant(grid, 0.0), params, tol)
    return phi1, phi2


def robin_residual(pot: Potential, c, xi: BoundaryTrace, species: Species,
                   params: PhysParams) -> float:
    """Relative residual ``||A phi - b|| / max(1, ||b||)`` of the discrete system."""
    A = assemble_robin_laplacian(xi.grid, params)
    b = robin_rhs(charge_density(c, species).values, xi, params)
    r = A.matvec(pot.phi.values.ravel()) - b
    return float(np.linalg.norm(r) / max(1.0, np.linalg.norm(b)))
