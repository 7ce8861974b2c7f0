import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsnpp.mesh import BoundaryTrace, ScalarField, build_grid, lp_norm
from nsnpp.mms import robin_mms
from nsnpp.potential import (PhysParams, Species, assemble_robin_laplacian, charge_density,
                             robin_residual, robin_rhs, solve_potential, split_potential)

BINARY = Species((1.0, -1.0), (1.0, 1.0))


def const(g, v):
    return ScalarField.constant(g, v)


def gaussian(g, x0, y0, w, amp=1.0):
    return ScalarField.from_function(g, lambda x, y: amp * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (2 * w * w)))


@pytest.mark.parametrize("z, c, expected", [((1, -1), (2, 2), 0.0), ((2,), (3,), 6.0), ((1, -2), (4, 1), 2.0)])
def test_charge_density(z, c, expected):
    g = build_grid(4, 4)
    sp = Species(z, (1.0,) * len(z))
    rho = charge_density([const(g, v) for v in c], sp)
    assert np.all(rho.values == expected)


def test_charge_density_rejects_grid_mismatch():
    with pytest.raises(ValueError):
        charge_density([const(build_grid(4, 4), 1.0), const(build_grid(5, 4), 1.0)], BINARY)


def test_params_and_species_validation():
    assert PhysParams() == PhysParams(1.0, 1.0, 1.0, 1.0)
    for bad in ({"eps": 0.0}, {"tau": -1.0}, {"rho": np.nan}, {"mu": 0.0}):
        with pytest.raises(ValueError):
            PhysParams(**bad)
    with pytest.raises(ValueError):
        Species((1.0,), (0.0,))
    with pytest.raises(ValueError):
        Species((), ())


def test_robin_matrix_spd_small():
    A = assemble_robin_laplacian(build_grid(2, 2), PhysParams()).toarray()
    assert A.shape == (4, 4)
    assert np.array_equal(A, A.T)
    assert np.linalg.eigvalsh(A).min() > 0


def test_robin_matrix_interior_row_sums_vanish():
    g = build_grid(4, 4)
    A = assemble_robin_laplacian(g, PhysParams()).toarray()
    idx = np.arange(16).reshape(4, 4)
    for k in idx[1:-1, 1:-1].ravel():
        assert abs(A[k].sum()) <= 1e-14 * np.abs(A[k]).max()
    # wall rows carry the positive Robin term
    assert np.all(A[idx[0, :]].sum(axis=1) > 0)


def test_robin_matrix_symmetric():
    A = assemble_robin_laplacian(build_grid(8, 8, 1.0, 2.0), PhysParams(eps=0.3, tau=2.0)).toarray()
    assert np.abs(A - A.T).max() <= 1e-15 * np.abs(A).max()


def test_constant_solution_from_wall_data():
    g = build_grid(16, 12)
    params = PhysParams(tau=2.0)
    pot = solve_potential([const(g, 0.0)], BoundaryTrace.constant(g, 2.0), Species((1.0,), (1.0,)), params)
    assert np.abs(pot.phi.values - 1.0).max() <= 1e-10
    assert np.abs(pot.trace.bottom - 1.0).max() <= 1e-10
    assert np.abs(pot.grad_x[1:-1]).max() <= 1e-8


def test_zero_data_zero_potential():
    g = build_grid(8, 8)
    pot = solve_potential([const(g, 0.0)], BoundaryTrace.constant(g, 0.0), Species((1.0,), (1.0,)), PhysParams())
    assert np.all(pot.phi.values == 0.0)


def test_electroneutral_zero_potential():
    g = build_grid(16, 16)
    c = gaussian(g, 0.3, 0.6, 0.1)
    pot = solve_potential([c, c], BoundaryTrace.constant(g, 0.0), BINARY, PhysParams())
    assert np.abs(pot.phi.values).max() <= 1e-12


def test_mms_second_order():
    res = robin_mms((32, 64, 128))
    assert res.min_order >= 1.9


def test_mms_rectangle_and_parameters():
    res = robin_mms((16, 32, 64), PhysParams(eps=0.5, tau=3.0), lx=2.0, ly=1.0)
    assert res.min_order >= 1.9


def test_gradients_are_differences_of_phi(rng):
    g = build_grid(10, 7)
    c = ScalarField(g, rng.random(g.shape))
    pot = solve_potential([c], BoundaryTrace.constant(g, 0.5), Species((1.0,), (1.0,)), PhysParams())
    assert np.array_equal(pot.grad_x[1:-1], np.diff(pot.phi.values, axis=0) / g.dx)
    assert np.array_equal(pot.grad_y[:, 1:-1], np.diff(pot.phi.values, axis=1) / g.dy)


def test_residual_below_tolerance(rng):
    g = build_grid(64, 64)
    c = [ScalarField(g, 1 + rng.random(g.shape)), ScalarField(g, 1 + rng.random(g.shape))]
    xi = BoundaryTrace.from_edges(g, bottom=lambda s: np.sin(2 * np.pi * s), left=1.0, right=-1.0)
    pot = solve_potential(c, xi, BINARY, PhysParams(), tol=1e-12)
    assert pot.report.converged
    assert robin_residual(pot, c, xi, BINARY, PhysParams()) <= 1e-12
    b = robin_rhs(charge_density(c, BINARY).values, xi, PhysParams())
    assert pot.report.residual <= 1e-12 * max(1.0, np.linalg.norm(b))


def test_split_superposition():
    g = build_grid(24, 24)
    c = [gaussian(g, 0.3, 0.3, 0.1, 2.0), gaussian(g, 0.7, 0.6, 0.15)]
    xi = BoundaryTrace.from_edges(g, left=1.0, right=-0.5, top=lambda s: np.cos(np.pi * s))
    tol = 1e-12
    pot = solve_potential(c, xi, BINARY, PhysParams(), tol)
    p1, p2 = split_potential(c, xi, BINARY, PhysParams(), tol)
    # the error bound follows the residual scaling of the solves
    assert lp_norm(p1.phi + p2.phi - pot.phi, np.inf) <= 2 * tol * 1e3


def test_split_degenerate_parts():
    g = build_grid(8, 8)
    c = [gaussian(g, 0.5, 0.5, 0.2), const(g, 0.1)]
    p1, p2 = split_potential(c, BoundaryTrace.constant(g, 0.0), BINARY, PhysParams())
    assert np.all(p1.phi.values == 0.0) and np.abs(p2.phi.values).max() > 0
    p1, p2 = split_potential([const(g, 1.0), const(g, 1.0)], BoundaryTrace.constant(g, 1.0), BINARY, PhysParams())
    assert np.all(p2.phi.values == 0.0)


@settings(max_examples=15, deadline=None)
@given(alpha=st.floats(-10, 10), seed=st.integers(0, 2 ** 31))
def test_linearity(alpha, seed):
    rng = np.random.default_rng(seed)
    g = build_grid(12, 9)
    sp = Species((1.0,), (1.0,))
    c = ScalarField(g, rng.random(g.shape))
    xi = BoundaryTrace(g, *(rng.standard_normal(n) for n in (g.nx, g.nx, g.ny, g.ny)))
    tol = 1e-13
    base = solve_potential([c], xi, sp, PhysParams(), tol).phi
    scaled = solve_potential([c * alpha], xi * alpha, sp, PhysParams(), tol).phi
    assert lp_norm(scaled - base * alpha, np.inf) <= 1e3 * tol * max(1.0, abs(alpha)) * max(1.0, lp_norm(base, np.inf))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_nonnegative_wall_data_nonnegative_potential(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(10, 14)
    xi = BoundaryTrace(g, *(rng.random(n) for n in (g.nx, g.nx, g.ny, g.ny)))
    pot = solve_potential([const(g, 0.0)], xi, Species((1.0,), (1.0,)), PhysParams(tau=0.5))
    assert pot.phi.values.min() >= -1e-12
