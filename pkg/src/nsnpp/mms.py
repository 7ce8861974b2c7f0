"""Manufactured-solution convergence study for the Robin-Poisson solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BoundaryTrace, build_grid
from .potential import PhysParams, solve_potential_from_charge


@dataclass(frozen=True)
class MmsResult:
    levels: tuple
    errors: tuple
    orders: tuple

    @property
    def min_order(self) -> float:
        return min(self.orders)


def _exact(x, y, lx, ly):
    return np.cos(np.pi * x / lx) * np.cos(np.pi * y / ly) + 0.5 * x * y


def robin_mms(levels=(32, 64, 128), params: PhysParams = PhysParams(), lx: float = 1.0,
              ly: float = 1.0, tol: float = 1e-12) -> MmsResult:
    """L2 errors and observed orders for ``phi = cos(pi x/lx) cos(pi y/ly) + x y / 2``.

    The charge is ``-eps lap(phi)`` and the wall data ``d(phi)/dn + tau phi``,
    both evaluated exactly.
    """
    levels = tuple(int(n) for n in levels)
    if len(levels) < 2:
        raise ValueError("need at least two grid levels")
    kx, ky = np.pi / lx, np.pi / ly
    eps, tau = params.eps, params.tau
    errors = []
    for n in levels:
        g = build_grid(n, n, lx, ly)
        x, y = g.cell_centers()
        charge = eps * (kx ** 2 + ky ** 2) * np.cos(kx * x) * np.cos(ky * y)
        xc, yc = g.xc, g.yc
        # outward normal derivatives on each wall
        dn = {"bottom": -(0.5 * xc), "top": -ky * np.cos(kx * xc) * np.sin(ky * ly) + 0.5 * xc,
              "left": -(0.5 * yc), "right": -kx * np.sin(kx * lx) * np.cos(ky * yc) + 0.5 * yc}
        val = {"bottom": _exact(xc, 0.0, lx, ly), "top": _exact(xc, ly, lx, ly),
               "left": _exact(0.0, yc, lx, ly), "right": _exact(lx, yc, lx, ly)}
        xi = BoundaryTrace(g, **{e: dn[e] + tau * val[e] for e in dn})
        pot = solve_potential_from_charge(charge, xi, params, tol)
        err = pot.phi.values - _exact(x, y, lx, ly)
        errors.append(float(np.sqrt((err ** 2).sum() * g.cell_area)))
    orders = tuple(float(np.log(errors[k] / errors[k + 1]) / np.log(levels[k + 1] / levels[k]))
                   for k in range(len(levels) - 1))
    return MmsResult(levels, tuple(errors), orders)
