"""Direct solve of the stationary problem (no flow, Boltzmann-distributed ions).

At equilibrium ``u = 0``, each Slotboom variable is constant and
``c_i = zeta_i exp(-z_i phi)`` with ``zeta_i = m_i / int exp(-z_i phi)``, so only
the nonlinear Robin-Poisson problem for ``phi`` remains. It is solved by a
damped fixed point in ``phi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import PressureField
from .mesh import BoundaryTrace, GridSpec, MacVelocity, ScalarField, integrate
from .potential import (PhysParams, Potential, Species, charge_density, robin_residual,
                        solve_potential_from_charge)
from .sparse import SolverError
from .transport import SLOTBOOM_LIMIT, compute_fluxes, flux_divergence


@dataclass(frozen=True, eq=False)
class SteadyState:
    c_inf: tuple
    phi_inf: Potential
    zeta_inf: tuple
    pi_inf: PressureField
    masses: tuple
    residual: float
    iterations: int
    xi: BoundaryTrace

    @property
    def eta0(self) -> float:
        """Smallest equilibrium concentration (positive by construction)."""
        return float(min(ci.values.min() for ci in self.c_inf))


def boltzmann_concentrations(phi: np.ndarray, masses, species: Species, grid: GridSpec):
    """``(c_i, zeta_i)`` with ``c_i = zeta_i exp(-z_i phi)`` carrying mass ``m_i``."""
    cs, zetas = [], []
    for m, z in zip(masses, species.z):
        arg = -z * phi
        if np.abs(arg).max(initial=0.0) > SLOTBOOM_LIMIT:
            raise OverflowError(f"|z*phi| exceeds {SLOTBOOM_LIMIT}; potential is unphysical")
        # shift the exponent so large potentials do not overflow before normalising
        shift = arg.max()
        e = np.exp(arg - shift)
        scale = m / (e.sum() * grid.cell_area)
        cs.append(ScalarField(grid, scale * e))
        zetas.append(float(scale * np.exp(-shift)))
    return cs, zetas


def equilibrium_pressure(candidate: SteadyState) -> PressureField:
    """Mean-centred ``sum_j c_j``."""
    total = sum(ci.values for ci in candidate.c_inf)
    return PressureField(candidate.phi_inf.grid, total)


def solve_steady(masses, xi: BoundaryTrace, species: Species, params: PhysParams,
                 grid: GridSpec | None = None, tol: float = 1e-10, maxit: int = 5000,
                 omega: float = 0.5, phi0=None, potential_tol: float | None = None) -> SteadyState:
    """Damped fixed point ``phi <- (1 - omega) phi + omega S(phi)``.

    ``S`` solves the Robin problem with the Boltzmann charge of ``phi``. The
    damping is halved whenever the update norm grows. Converged when
    ``||S(phi) - phi||_inf <= tol``. The default start is the zero-charge
    solve with the wall data ``xi``.
    """
    grid = xi.grid if grid is None else grid
    if grid != xi.grid:
        raise ValueError("wall data lives on a different grid")
    masses = tuple(float(m) for m in masses)
    if len(masses) != species.n:
        raise ValueError(f"expected {species.n} masses, got {len(masses)}")
    if any(not (m > 0 and np.isfinite(m)) for m in masses):
        raise ValueError("masses must be positive")
    if not 0 < omega <= 1:
        raise ValueError("omega must lie in (0, 1]")
    ptol = min(1e-12, tol) if potential_tol is None else potential_tol

    if phi0 is None:
        phi = solve_potential_from_charge(np.zeros(grid.shape), xi, params, ptol).phi.values
    else:
        phi = np.array(phi0.values if isinstance(phi0, ScalarField) else phi0, dtype=float).reshape(grid.shape)

    prev = np.inf
    it = 0
    while True:
        it += 1
        c, zeta = boltzmann_concentrations(phi, masses, species, grid)
        rho = charge_density(c, species).values
        pot = solve_potential_from_charge(rho, xi, params, ptol, x0=phi)
        delta = float(np.abs(pot.phi.values - phi).max())
        if delta <= tol:
            break
        if it >= maxit:
            raise SolverError(f"steady solve did not converge in {maxit} iterations "
                              f"(last update {delta:.3e})")
        if delta > prev:
            omega *= 0.5
        prev = delta
        phi = (1.0 - omega) * phi + omega * pot.phi.values

    state = SteadyState(tuple(c), pot, tuple(zeta), PressureField(grid, sum(ci.values for ci in c)),
                        masses, 0.0, it, xi)
    res = steady_residual(state, species, params)
    return SteadyState(state.c_inf, pot, state.zeta_inf, state.pi_inf, masses, res, it, xi)


def steady_residual(candidate: SteadyState, species: Species, params: PhysParams) -> float:
    """Largest of: Slotboom coefficient of variation, Robin residual, ``||div j_i||_inf``."""
    pot = candidate.phi_inf
    grid = pot.grid
    phi = pot.phi.values
    worst = 0.0
    for ci, z in zip(candidate.c_inf, species.z):
        zeta = ci.values * np.exp(z * phi)
        mean = zeta.mean()
        worst = max(worst, float(zeta.std() / mean) if mean > 0 else np.inf)
    worst = max(worst, robin_residual(pot, candidate.c_inf, candidate.xi, species, params))
    fl = compute_fluxes(list(candidate.c_inf), pot, MacVelocity.zeros(grid), species)
    for fx, fy in zip(fl.drift_x, fl.drift_y):
        worst = max(worst, float(np.abs(flux_divergence(fx, fy, grid)).max()))
    return worst


def steady_for_state(state, xi: BoundaryTrace, species: Species, params: PhysParams, **kwargs) -> SteadyState:
    """Equilibrium with the masses carried by ``state``."""
    return solve_steady([integrate(ci) for ci in state.c], xi, species, params, **kwargs)
