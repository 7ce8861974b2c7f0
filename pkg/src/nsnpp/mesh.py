"""Uniform rectangular grids, cell-centred scalars and MAC face velocities.

Layout conventions used throughout the package:

* scalar values live at cell centres in an ``(nx, ny)`` array indexed ``[i, j]``
  with ``i`` running along x;
* ``u_x`` lives on vertical faces, shape ``(nx + 1, ny)``; ``u_y`` on horizontal
  faces, shape ``(nx, ny + 1)``;
* boundary traces are stored per edge at face midpoints: ``bottom``/``top``
  have ``nx`` entries, ``left``/``right`` have ``ny``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

EDGES = ("bottom", "top", "left", "right")


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("cell counts must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"need nx, ny >= 2, got ({self.nx}, {self.ny})")
        if not (self.lx > 0 and self.ly > 0) or not np.isfinite([self.lx, self.ly]).all():
            raise ValueError(f"extents must be positive, got ({self.lx}, {self.ly})")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.lx + self.ly)

    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def xf(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.dx

    @property
    def yf(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.dy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays of shape ``(nx, ny)``."""
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def xface_centers(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xf, self.yc, indexing="ij")

    def yface_centers(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xc, self.yf, indexing="ij")

    def edge_length(self, edge: str) -> int:
        return self.nx if edge in ("bottom", "top") else self.ny

    def edge_spacing(self, edge: str) -> float:
        """Face length along an edge."""
        return self.dx if edge in ("bottom", "top") else self.dy

    def normal_spacing(self, edge: str) -> float:
        """Cell width normal to an edge."""
        return self.dy if edge in ("bottom", "top") else self.dx


def build_grid(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> GridSpec:
    return GridSpec(int(nx), int(ny), float(lx), float(ly))


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} contains non-finite entries")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        _check_finite("ScalarField", vals)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        X, Y = grid.cell_centers()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape).astype(float))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


def _vals(x):
    return x.values if isinstance(x, ScalarField) else x


@dataclass(frozen=True, eq=False)
class MacVelocity:
    grid: GridSpec
    ux: np.ndarray
    uy: np.ndarray

    def __post_init__(self):
        ux = np.asarray(self.ux, dtype=float)
        uy = np.asarray(self.uy, dtype=float)
        g = self.grid
        if ux.shape != (g.nx + 1, g.ny) or uy.shape != (g.nx, g.ny + 1):
            raise ValueError(f"velocity shapes {ux.shape}, {uy.shape} do not match grid {g.shape}")
        _check_finite("MacVelocity", ux)
        _check_finite("MacVelocity", uy)
        object.__setattr__(self, "ux", ux)
        object.__setattr__(self, "uy", uy)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "MacVelocity":
        return cls(grid, np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    @classmethod
    def from_functions(cls, grid: GridSpec, fx, fy, no_slip: bool = True) -> "MacVelocity":
        """Sample components at face midpoints; optionally zero the wall-normal faces."""
        Xx, Yx = grid.xface_centers()
        Xy, Yy = grid.yface_centers()
        ux = np.broadcast_to(fx(Xx, Yx), Xx.shape).astype(float)
        uy = np.broadcast_to(fy(Xy, Yy), Xy.shape).astype(float)
        if no_slip:
            ux[0], ux[-1] = 0.0, 0.0
            uy[:, 0], uy[:, -1] = 0.0, 0.0
        return cls(grid, ux, uy)

    def boundary_normal_max(self) -> float:
        return float(max(np.abs(self.ux[[0, -1]]).max(), np.abs(self.uy[:, [0, -1]]).max()))

    def max_abs(self) -> float:
        return float(max(np.abs(self.ux).max(), np.abs(self.uy).max()))

    def cell_averaged(self) -> tuple[np.ndarray, np.ndarray]:
        return 0.5 * (self.ux[1:] + self.ux[:-1]), 0.5 * (self.uy[:, 1:] + self.uy[:, :-1])


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    grid: GridSpec
    bottom: np.ndarray
    top: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        for edge in EDGES:
            arr = np.asarray(getattr(self, edge), dtype=float)
            if arr.shape != (self.grid.edge_length(edge),):
                raise ValueError(f"{edge} trace has shape {arr.shape}, expected "
                                 f"({self.grid.edge_length(edge)},)")
            _check_finite(f"BoundaryTrace.{edge}", arr)
            object.__setattr__(self, edge, arr)

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "BoundaryTrace":
        return cls(grid, *(np.full(grid.edge_length(e), float(value)) for e in EDGES))

    @classmethod
    def from_edges(cls, grid: GridSpec, **edges) -> "BoundaryTrace":
        """Build from per-edge constants or callables of the arc-length coordinate.

        The arc-length runs along +x on bottom/top and along +y on left/right.
        Missing edges default to zero.
        """
        arrays = {}
        for e in EDGES:
            spec = edges.get(e, 0.0)
            n = grid.edge_length(e)
            s = (np.arange(n) + 0.5) * grid.edge_spacing(e)
            arrays[e] = np.broadcast_to(spec(s) if callable(spec) else float(spec), (n,)).astype(float)
        return cls(grid, **arrays)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "BoundaryTrace":
        """Sample ``fn(x, y)`` at the boundary face midpoints."""
        xc, yc = grid.xc, grid.yc
        return cls(grid,
                   bottom=np.broadcast_to(fn(xc, np.zeros_like(xc)), xc.shape),
                   top=np.broadcast_to(fn(xc, np.full_like(xc, grid.ly)), xc.shape),
                   left=np.broadcast_to(fn(np.zeros_like(yc), yc), yc.shape),
                   right=np.broadcast_to(fn(np.full_like(yc, grid.lx), yc), yc.shape))

    def edges(self):
        return [(e, getattr(self, e)) for e in EDGES]

    def map(self, fn) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, *(fn(getattr(self, e)) for e in EDGES))

    def __sub__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        return BoundaryTrace(self.grid, *(getattr(self, e) - getattr(other, e) for e in EDGES))

    def __mul__(self, a: float) -> "BoundaryTrace":
        return self.map(lambda v: a * v)

    __rmul__ = __mul__


def integrate(field: ScalarField) -> float:
    """Midpoint-rule integral over the domain."""
    return float(field.values.sum() * field.grid.cell_area)


def lp_norm(field: ScalarField, p=2) -> float:
    v = field.values
    if p == 1:
        return float(np.abs(v).sum() * field.grid.cell_area)
    if p == 2:
        return float(np.sqrt((v * v).sum() * field.grid.cell_area))
    if p in (np.inf, "inf"):
        return float(np.abs(v).max())
    raise ValueError(f"unsupported norm order {p!r}")


def boundary_l2(trace: BoundaryTrace) -> float:
    g = trace.grid
    total = sum((v * v).sum() * g.edge_spacing(e) for e, v in trace.edges())
    return float(np.sqrt(total))


def _wall_values(g: np.ndarray, axis: int):
    # linear extrapolation needs two interior faces; with one (n = 2) copy it
    i = [slice(None)] * g.ndim
    def at(k):
        i[axis] = k
        return g[tuple(i)].copy()
    if g.shape[axis] < 4:
        return at(1), at(-2)
    return 2.0 * at(1) - at(2), 2.0 * at(-2) - at(-3)


def face_gradients(field: ScalarField, normal: BoundaryTrace | None = None):
    """Face-normal differences of a cell-centred field.

    Returns ``(gx, gy)`` with MAC face shapes. Interior faces carry centred
    differences. Boundary faces take the outward normal derivative from
    ``normal`` when given; otherwise they are linearly extrapolated from the
    two nearest interior faces (exact for linear fields, second order).
    """
    g = field.grid
    v = field.values
    gx = np.empty((g.nx + 1, g.ny))
    gy = np.empty((g.nx, g.ny + 1))
    gx[1:-1] = np.diff(v, axis=0) / g.dx
    gy[:, 1:-1] = np.diff(v, axis=1) / g.dy
    if normal is None:
        gx[0], gx[-1] = _wall_values(gx, 0)
        gy[:, 0], gy[:, -1] = _wall_values(gy, 1)
    else:
        gx[0], gx[-1] = -normal.left, normal.right
        gy[:, 0], gy[:, -1] = -normal.bottom, normal.top
    return gx, gy


def face_gradient_l2_sq(gx: np.ndarray, gy: np.ndarray, grid: GridSpec) -> float:
    """Quadrature of squared face gradients over dual cells.

    Interior faces own a full dual cell (``dx*dy``); boundary faces own the
    half cell between the wall and the adjacent cell centre.
    """
    a = grid.cell_area
    sx = (gx[1:-1] ** 2).sum() + 0.5 * (gx[0] ** 2 + gx[-1] ** 2).sum()
    sy = (gy[:, 1:-1] ** 2).sum() + 0.5 * (gy[:, 0] ** 2 + gy[:, -1] ** 2).sum()
    return float((sx + sy) * a)


def grad_l2_sq(field: ScalarField, normal: BoundaryTrace | None = None) -> float:
    """Discrete ``||grad f||_2^2`` from face differences (see :func:`face_gradients`)."""
    gx, gy = face_gradients(field, normal)
    return face_gradient_l2_sq(gx, gy, field.grid)


# --- snapshot files -------------------------------------------------------

def write_snapshot(path, field: ScalarField, t: float = 0.0) -> Path:
    """Write one field as CSV: a header comment, then ``ny`` rows of ``nx`` values."""
    g = field.grid
    path = Path(path)
    header = f"# nx={g.nx} ny={g.ny} lx={g.lx!r} ly={g.ly!r} t={float(t)!r}\n"
    rows = "\n".join(",".join(f"{x:.17g}" for x in row) for row in field.values.T)
    path.write_text(header + rows + "\n")
    return path


def read_snapshot(path) -> tuple[ScalarField, float]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing snapshot header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    grid = build_grid(int(meta["nx"]), int(meta["ny"]), float(meta["lx"]), float(meta["ly"]))
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln.strip()])
    if data.shape != (grid.ny, grid.nx):
        raise ValueError(f"{path}: data shape {data.shape} does not match header")
    return ScalarField(grid, data.T), float(meta["t"])
