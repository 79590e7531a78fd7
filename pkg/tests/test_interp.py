import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slrecon import _accel
from slrecon.errors import ConfigError, OutOfDomainError
from slrecon.grid import Grid, ScalarField
from slrecon.interp import (
    InterpolatorKind,
    Stencil4,
    interp,
    interp_cells,
    interp_points,
    weno_1d,
    weno_weights,
)

coef = st.floats(-5, 5, allow_nan=False)


def quad_field(dim, c, dx=0.1, n=10):
    g = Grid((-0.3,) * dim, dx, (n,) * dim)
    X = g.mesh()
    return g, ScalarField(g, quad(c, *X))


def quad(c, *x):
    if len(x) == 2:
        X, Y = x
        return c[0] + c[1] * X + c[2] * Y + c[3] * X * X + c[4] * X * Y + c[5] * Y * Y
    X, Y, Z = x
    return (c[0] + c[1] * X + c[2] * Y + c[3] * Z + c[4] * X * X + c[5] * Y * Y
            + c[6] * Z * Z + c[7] * X * Y + c[8] * Y * Z + c[9] * X * Z)


def interior_points(g, rng, n):
    lo = np.asarray(g.origin) + g.dx
    hi = g.upper - g.dx
    return rng.uniform(lo, hi, size=(n, g.dim))


@settings(max_examples=40, deadline=None)
@given(c=st.lists(coef, min_size=10, max_size=10), seed=st.integers(0, 10**6), dim=st.sampled_from([2, 3]))
def test_weno_reproduces_quadratics(c, seed, dim):
    g, f = quad_field(dim, c)
    pts = interior_points(g, np.random.default_rng(seed), 20)
    got = interp_points("weno", f, pts)
    want = quad(c, *pts.T)
    assert np.max(np.abs(got - want)) <= 1e-10 * max(1.0, np.max(np.abs(c)))


@settings(max_examples=40, deadline=None)
@given(c=st.lists(coef, min_size=4, max_size=4), seed=st.integers(0, 10**6), dim=st.sampled_from([2, 3]))
def test_q1_reproduces_affine(c, seed, dim):
    g = Grid((0.0,) * dim, 0.2, (7,) * dim)
    X = g.mesh()
    vals = c[0] + sum(ci * Xi for ci, Xi in zip(c[1:], X))
    f = ScalarField(g, vals)
    pts = np.random.default_rng(seed).uniform(g.origin, g.upper, size=(25, dim))
    want = c[0] + pts @ np.asarray(c[1:dim + 1])
    assert np.max(np.abs(interp_points("q1", f, pts) - want)) <= 1e-12 * max(1.0, np.max(np.abs(c)))


@pytest.mark.parametrize("kind", ["q1", "weno"])
def test_node_exactness(kind, rng, backend):
    g = Grid((1.0, -2.0, 0.5), 0.3, (7, 8, 6))
    f = ScalarField(g, rng.normal(size=g.dims))
    idx = np.stack(np.unravel_index(rng.choice(g.size, 60, replace=False), g.dims), axis=1)
    pts = g.coords(tuple(idx.T))
    got = interp_points(kind, f, pts)
    assert np.max(np.abs(got - f.values[tuple(idx.T)])) <= 1e-12


@pytest.mark.parametrize("kind", ["q1", "weno"])
@pytest.mark.parametrize("dim", [2, 3])
def test_cross_face_continuity(kind, dim, rng, backend):
    g = Grid((0.0,) * dim, 0.25, (9,) * dim)
    f = ScalarField(g, np.sin(3 * sum(g.mesh())) + rng.normal(scale=0.2, size=g.dims))
    for a in range(dim):
        for _ in range(10):
            cell = rng.integers(0, 7, size=dim)
            cell[a] = rng.integers(0, 6)
            theta = rng.uniform(size=dim)
            lo_t, hi_t = theta.copy(), theta.copy()
            lo_t[a], hi_t[a] = 1.0, 0.0
            nxt = cell.copy()
            nxt[a] += 1
            left = interp_cells(kind, f, cell, lo_t)[0]
            right = interp_cells(kind, f, nxt, hi_t)[0]
            assert abs(left - right) <= 1e-12


def test_linear_weights_at_node():
    w = weno_weights(Stencil4((0.3, -1.0, 2.0, 0.5), 0.1, 0.0))
    assert w.C_L == 2 / 3
    assert w.C_R == 1 / 3
    w1 = weno_weights(Stencil4((0.3, -1.0, 2.0, 0.5), 0.1, 1.0))
    assert w1.C_L == 1 / 3 and w1.C_R == 2 / 3


@pytest.mark.parametrize("a2,dx", [(1.0, 0.1), (-2.5, 0.03), (0.7, 1.0)])
def test_indicator_of_parabola(a2, dx):
    vals = tuple(a2 * k * k for k in (-1, 0, 1, 2))
    w = weno_weights(Stencil4(vals, dx, 0.4))
    assert w.I_L == pytest.approx(4 * a2 * a2 / dx**2, rel=1e-14)
    assert w.I_R == pytest.approx(4 * a2 * a2 / dx**2, rel=1e-14)


def test_weights_convex_and_nonoscillatory():
    w = weno_weights(Stencil4((0.0, 0.0, 0.0, 1.0), 0.1, 0.5))
    assert 0 <= w.w_L <= 1 and w.w_L + w.w_R == pytest.approx(1.0)
    # the step lives in the right substencil, so the smooth left one dominates
    assert w.w_L > 0.999
    assert abs(weno_1d((0.0, 0.0, 0.0, 1.0), 0.5, 0.1)) < 1e-3


def test_weno_1d_argument_forms():
    st_ = Stencil4((1.0, 2.0, 4.0, 8.0), 0.2, 0.3)
    assert weno_1d(st_) == weno_1d((1.0, 2.0, 4.0, 8.0), 0.3, 0.2)


def test_stencil_validation():
    with pytest.raises(ValueError):
        Stencil4((1.0, 2.0, 3.0), 0.1, 0.5)
    with pytest.raises(ValueError):
        Stencil4((1.0, 2.0, 3.0, 4.0), 0.1, 1.5)
    with pytest.raises(ValueError):
        Stencil4((1.0, np.inf, 3.0, 4.0), 0.1, 0.5)


def test_boundary_cells_degrade_to_linear():
    g = Grid((0.0, 0.0), 1.0, (6, 6))
    X, Y = g.mesh()
    f = ScalarField(g, X**2)
    # cell 0 along x has no left neighbour: linear blend of nodes 0 and 1
    assert interp("weno", f, (0.5, 2.0)) == pytest.approx(0.5)
    # an interior cell reproduces the parabola
    assert interp("weno", f, (2.5, 2.0)) == pytest.approx(6.25)


def test_out_of_domain_and_kind():
    g = Grid((0.0, 0.0), 1.0, (6, 6))
    f = ScalarField(g, np.zeros(g.dims))
    with pytest.raises(OutOfDomainError):
        interp("q1", f, (6.0, 0.0))
    with pytest.raises(ConfigError):
        InterpolatorKind.parse("cubic")
    assert InterpolatorKind.parse("WENO") is InterpolatorKind.WENO


@pytest.mark.parametrize("kind", ["q1", "weno"])
@pytest.mark.parametrize("dim", [2, 3])
def test_backends_bit_identical(kind, dim, rng):
    g = Grid((0.0,) * dim, 0.1, (12,) * dim)
    f = ScalarField(g, rng.normal(size=g.dims))
    pts = rng.uniform(g.origin, g.upper, size=(500, dim))
    with _accel.using("numba"):
        a = interp_points(kind, f, pts)
    with _accel.using("numpy"):
        b = interp_points(kind, f, pts)
    np.testing.assert_array_equal(a, b)


def test_weno_third_order_on_smooth_data():
    errs = []
    for n in (20, 40, 80):
        dx = 2.0 / (n - 1)
        g = Grid((-1.0, -1.0), dx, (n, n))
        X, Y = g.mesh()
        f = ScalarField(g, np.sin(2 * X) * np.cos(Y))
        pts = np.random.default_rng(0).uniform(-0.5, 0.5, size=(200, 2))
        errs.append(np.max(np.abs(interp_points("weno", f, pts) - np.sin(2 * pts[:, 0]) * np.cos(pts[:, 1]))))
    rates = np.log2(np.asarray(errs[:-1]) / np.asarray(errs[1:]))
    assert np.all(rates > 2.5)
