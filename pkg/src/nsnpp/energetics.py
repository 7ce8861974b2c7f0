"""Free energy, dissipation rate and relative energy of a discrete state.

The functional is

    V = rho/2 ||u||^2 + sum_i int c_i log c_i + eps/2 ||grad phi||^2 + eps*tau/2 ||phi||^2_{wall}.

Its discrete form is chosen so that, for a potential that solves the Robin
problem, the electric part is exactly the quadratic form of the discrete
operator (wall faces use the Robin normal derivative over a half cell).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow import log_mean, velocity_grad_l2_sq, velocity_l2
from .mesh import MacVelocity, ScalarField, boundary_l2, face_gradient_l2_sq, integrate
from .potential import PhysParams, Potential, Species
from .transport import bernoulli

NEG_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class State:
    """Solution snapshot ``(u, c, phi)`` at time ``t``; ``pressure`` is the last pressure (mean zero)."""

    u: MacVelocity
    c: tuple
    phi: Potential
    t: float = 0.0
    pressure: ScalarField | None = None

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(self.c))
        grid = self.u.grid
        if self.phi.grid != grid or any(ci.grid != grid for ci in self.c):
            raise ValueError("state fields live on different grids")

    @property
    def grid(self):
        return self.u.grid


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    entropy: float
    field_energy: float
    boundary_energy: float
    dissipation: float = float("nan")
    psi: float | None = None
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total",
                           self.kinetic + self.entropy + self.field_energy + self.boundary_energy)


def _nonneg(c: ScalarField) -> np.ndarray:
    v = c.values
    lo = v.min()
    if lo < -NEG_TOL:
        raise ValueError(f"concentration has entries below -{NEG_TOL:g} (min {lo:.3e})")
    return np.maximum(v, 0.0)


def _xlogx(v):
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def entropy_integral(c: ScalarField) -> float:
    """Midpoint quadrature of ``c log c`` with ``0 log 0 = 0``."""
    return float(_xlogx(_nonneg(c)).sum() * c.grid.cell_area)


def electric_energy(pot: Potential, params: PhysParams) -> tuple[float, float]:
    """``(eps/2 ||grad phi||^2, eps*tau/2 ||phi||^2_wall)``."""
    grad = face_gradient_l2_sq(pot.grad_x, pot.grad_y, pot.grid)
    return 0.5 * params.eps * grad, 0.5 * params.eps * params.tau * boundary_l2(pot.trace) ** 2


def compute_energy(state: State, species: Species, params: PhysParams,
                   with_dissipation: bool = True) -> EnergyReport:
    if len(state.c) != species.n:
        raise ValueError(f"expected {species.n} concentration fields, got {len(state.c)}")
    kinetic = 0.5 * params.rho * velocity_l2(state.u) ** 2
    entropy = sum(entropy_integral(ci) for ci in state.c)
    fe, be = electric_energy(state.phi, params)
    diss = compute_dissipation(state, species, params) if with_dissipation else float("nan")
    return EnergyReport(kinetic, entropy, fe, be, diss)


def default_floor(c: ScalarField) -> float:
    """``1e-12 * m / |Omega|``, never below the smallest positive double."""
    return max(1e-12 * integrate(c) / c.grid.area, np.finfo(float).tiny)


def _face_terms(c: ScalarField, phi: np.ndarray, z: float, axis: int, h: float):
    """Slotboom jump and face weights along one axis.

    The Scharfetter-Gummel drift flux is ``j = -D w (zeta_R - zeta_L)/h`` with
    ``w = B(-z dphi) exp(-z phi_R)``; the face concentration matching the
    exact semi-discrete entropy production is ``w * L(zeta_L, zeta_R)``.
    """
    v = np.maximum(c.values, 0.0)
    zeta = v * np.exp(z * phi)
    sl = [slice(None)] * 2
    sr = [slice(None)] * 2
    sl[axis] = slice(None, -1)
    sr[axis] = slice(1, None)
    sl, sr = tuple(sl), tuple(sr)
    w = bernoulli(-z * (phi[sr] - phi[sl])) * np.exp(-z * phi[sr])
    return zeta[sr] - zeta[sl], w, log_mean(zeta[sl], zeta[sr])


def _check_phi(phi: np.ndarray, species: Species):
    zmax = max(abs(z) for z in species.z)
    if zmax * np.abs(phi).max(initial=0.0) > 700.0:
        raise OverflowError("|z*phi| exceeds 700; potential is unphysical")


def compute_dissipation(state: State, species: Species, params: PhysParams,
                        floor: float | None = None, form: str = "zeta") -> float:
    """Dissipation ``mu ||grad u||^2 + sum_i int |j_i|^2 / (D_i c_i)``.

    ``form="zeta"`` evaluates ``D w^2 |grad zeta|^2 / c_face``, ``form="flux"``
    evaluates ``|j|^2 / (D c_face)`` from the face flux; both use the face
    concentration ``max(c_face, floor)`` (``floor`` defaults to
    ``1e-12 * m_i / |Omega|`` per species).
    """
    if form not in ("zeta", "flux"):
        raise ValueError("form must be 'zeta' or 'flux'")
    grid = state.grid
    phi = state.phi.phi.values
    _check_phi(phi, species)
    total = params.mu * velocity_grad_l2_sq(state.u)
    for ci, z, D in zip(state.c, species.z, species.D):
        fl = default_floor(ci) if floor is None else floor
        if fl <= 0:
            raise ValueError("floor must be positive")
        for axis, h, length in ((0, grid.dx, grid.dy), (1, grid.dy, grid.dx)):
            dz, w, lm = _face_terms(ci, phi, z, axis, h)
            cf = np.maximum(w * lm, fl)
            if form == "zeta":
                dens = D * w ** 2 * (dz / h) ** 2 / cf
            else:
                j = -D * w * dz / h
                dens = j ** 2 / (D * cf)
            total += float(dens.sum()) * h * length
    return float(total)


def _relative_entropy_density(v, ref):
    """``v log(v/ref) - v + ref`` written as ``ref * g(v/ref - 1)`` without cancellation."""
    x = v / ref - 1.0
    g = np.empty_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small]
    # (1+x) log(1+x) - x = sum_{n>=2} (-1)^n x^n / (n (n-1))
    g[small] = xs ** 2 * (1 / 2 - xs * (1 / 6 - xs * (1 / 12 - xs * (1 / 20 - xs * (1 / 30 - xs / 42)))))
    big = ~small & (x > -1.0)
    xl = x[big]
    g[big] = (1.0 + xl) * np.log1p(xl) - xl
    g[x <= -1.0] = 1.0  # v = 0
    return ref * g


def relative_energy(state: State, steady, species: Species, params: PhysParams,
                    mass_rtol: float = 1e-8) -> float:
    """Relative energy ``Psi`` of ``state`` with respect to the equilibrium ``steady``."""
    grid = state.grid
    psi = 0.5 * params.rho * velocity_l2(state.u) ** 2
    for k, (ci, cinf) in enumerate(zip(state.c, steady.c_inf)):
        m, minf = integrate(ci), integrate(cinf)
        if abs(m - minf) > mass_rtol * max(abs(minf), 1e-300):
            raise ValueError(f"species {species.labels[k]}: mass {m:.15g} does not match "
                             f"equilibrium mass {minf:.15g}")
        psi += float(_relative_entropy_density(_nonneg(ci), cinf.values).sum()) * grid.cell_area
    pot, pinf = state.phi, steady.phi_inf
    psi += 0.5 * params.eps * face_gradient_l2_sq(pot.grad_x - pinf.grad_x, pot.grad_y - pinf.grad_y, grid)
    psi += 0.5 * params.eps * params.tau * boundary_l2(pot.trace - pinf.trace) ** 2
    return float(psi)


def napier_bounds(a: float, b: float) -> tuple[float, float]:
    """``((sqrt a - sqrt b)^2, a (log a - log b) + b - a)``; the second is ``b`` at ``a = 0``."""
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    if a < 0:
        raise ValueError(f"a must be nonnegative, got {a}")
    lower = (np.sqrt(a) - np.sqrt(b)) ** 2
    value = b if a == 0 else a * (np.log(a) - np.log(b)) + b - a
    return float(lower), float(value)
