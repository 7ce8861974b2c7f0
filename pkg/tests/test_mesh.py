import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsnpp.mesh import (BoundaryTrace, MacVelocity, ScalarField, boundary_l2, build_grid,
                        grad_l2_sq, integrate, lp_norm, read_snapshot, write_snapshot)


@pytest.mark.parametrize("args, dx, dy", [((2, 2, 1.0, 1.0), 0.5, 0.5), ((10, 5, 2.0, 1.0), 0.2, 0.2)])
def test_build_grid_spacing(args, dx, dy):
    g = build_grid(*args)
    assert g.dx == pytest.approx(dx, abs=1e-15)
    assert g.dy == pytest.approx(dy, abs=1e-15)


@pytest.mark.parametrize("args", [(1, 4, 1.0, 1.0), (4, 0, 1.0, 1.0), (4, 4, 0.0, 1.0), (4, 4, 1.0, -2.0)])
def test_build_grid_rejects_bad_sizes(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_integrate_constants_and_linear():
    assert integrate(ScalarField.constant(build_grid(8, 8), 1.0)) == pytest.approx(1.0, abs=1e-14)
    assert integrate(ScalarField.constant(build_grid(8, 4, 2.0, 1.0), 3.0)) == pytest.approx(6.0, abs=1e-14)
    g = build_grid(64, 64)
    assert integrate(ScalarField.from_function(g, lambda x, y: x)) == pytest.approx(0.5, abs=1e-12)


def test_lp_norms():
    g = build_grid(8, 8)
    c = ScalarField.constant(g, -2.0)
    assert lp_norm(c, 1) == pytest.approx(2.0)
    assert lp_norm(c, np.inf) == pytest.approx(2.0)
    g = build_grid(128, 128)
    s = ScalarField.from_function(g, lambda x, y: np.sin(2 * np.pi * x) + 0 * y)
    assert lp_norm(s, 2) == pytest.approx(1 / np.sqrt(2), abs=1e-3)
    with pytest.raises(ValueError):
        lp_norm(c, 3)


def test_boundary_l2():
    g = build_grid(8, 8)
    assert boundary_l2(BoundaryTrace.constant(g, 1.0)) == pytest.approx(2.0, abs=1e-14)
    assert boundary_l2(BoundaryTrace.constant(g, 0.0)) == 0.0
    g = build_grid(10, 5, 2.0, 1.0)
    assert boundary_l2(BoundaryTrace.constant(g, 3.0)) == pytest.approx(3 * np.sqrt(6), abs=1e-12)


def test_grad_l2_sq_examples():
    for n in (4, 16, 33):
        g = build_grid(n, n)
        assert grad_l2_sq(ScalarField.constant(g, 7.0)) == 0.0
        assert grad_l2_sq(ScalarField.from_function(g, lambda x, y: x + 0 * y)) == pytest.approx(1.0, abs=1e-12)


def test_grad_l2_sq_converges_second_order():
    vals = []
    for n in (32, 64, 128):
        g = build_grid(n, n)
        vals.append(grad_l2_sq(ScalarField.from_function(g, lambda x, y: np.cos(np.pi * x) + 0 * y)))
    errs = np.abs(np.array(vals) - np.pi ** 2 / 2)
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 1.9)
    # Richardson slope from the computed values alone
    assert np.log2((vals[0] - vals[1]) / (vals[1] - vals[2])) >= 1.9


def test_grad_l2_sq_with_normal_data():
    g = build_grid(8, 8)
    f = ScalarField.from_function(g, lambda x, y: x + 0 * y)
    normal = BoundaryTrace.from_edges(g, left=-1.0, right=1.0)
    assert grad_l2_sq(f, normal) == pytest.approx(1.0, abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 2 ** 31))
def test_integrate_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    g = build_grid(7, 5, 1.3, 0.7)
    f = ScalarField(g, rng.standard_normal(g.shape))
    h = ScalarField(g, rng.standard_normal(g.shape))
    lhs = integrate(f * a + h * b)
    rhs = a * integrate(f) + b * integrate(h)
    assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(rhs)) + 1e-13 * (abs(a) + abs(b)) * lp_norm(f + h, 1)


@settings(max_examples=40, deadline=None)
@given(alpha=st.one_of(st.just(0.0), st.floats(1e-6, 1e3), st.floats(-1e3, -1e-6)), p=st.sampled_from([1, 2, np.inf]), seed=st.integers(0, 2 ** 31))
def test_lp_norm_homogeneous(alpha, p, seed):
    rng = np.random.default_rng(seed)
    g = build_grid(6, 9)
    f = ScalarField(g, rng.standard_normal(g.shape))
    assert lp_norm(f * alpha, p) == pytest.approx(abs(alpha) * lp_norm(f, p), rel=1e-13)


def test_constructors_reject_shape_mismatch():
    g = build_grid(4, 3)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros((3, 4)))
    with pytest.raises(ValueError):
        MacVelocity(g, np.zeros((4, 3)), np.zeros((4, 4)))
    with pytest.raises(ValueError):
        BoundaryTrace(g, np.zeros(4), np.zeros(4), np.zeros(4), np.zeros(3))
    with pytest.raises(FloatingPointError):
        ScalarField(g, np.full((4, 3), np.nan))


def test_mac_velocity_no_slip_sampling():
    g = build_grid(5, 4)
    u = MacVelocity.from_functions(g, lambda x, y: 1 + 0 * x, lambda x, y: 2 + 0 * x)
    assert u.boundary_normal_max() == 0.0
    assert u.ux[1:-1].min() == 1.0 and u.uy[:, 1:-1].min() == 2.0


def test_snapshot_roundtrip(tmp_path, rng):
    g = build_grid(5, 3, 2.0, 0.5)
    f = ScalarField(g, rng.standard_normal(g.shape))
    p = write_snapshot(tmp_path / "f.csv", f, t=0.125)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# nx=5 ny=3 lx=2.0 ly=0.5 t=0.125")
    assert len(lines) == 1 + g.ny and all(len(ln.split(",")) == g.nx for ln in lines[1:])
    back, t = read_snapshot(p)
    assert t == 0.125 and np.array_equal(back.values, f.values)
    # rows run along x with y increasing
    assert float(lines[1].split(",")[1]) == f.values[1, 0]
