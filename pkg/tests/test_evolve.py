import math

import numpy as np
import pytest

from slrecon.distance import DistanceField
from slrecon.errors import InvalidEnergyError, NumericalFailure
from slrecon.evolve import StepConfig, characteristic_feet, scale_factor, sl_step, tangent_basis, tangent_vectors
from slrecon.grid import BandParams, Grid, ScalarField, narrow_band


def make(grid, phi, d):
    f = ScalarField(grid, phi)
    dist = DistanceField(ScalarField(grid, d), np.zeros(grid.dims, bool))
    return f, dist


class TestTangents:
    def test_2d_example(self):
        np.testing.assert_allclose(tangent_basis((3.0, 4.0)).sigma, [0.8, -0.6])

    def test_2d_zero_gradient(self):
        np.testing.assert_array_equal(tangent_basis((0.0, 0.0)).sigma, [1.0, 0.0])

    def test_3d_degenerate(self):
        for g in [(0.0, 2.0, 0.0), (0.0, 0.0, 0.0)]:
            tb = tangent_basis(g)
            np.testing.assert_array_equal(tb.nu1, [1.0, 0.0, 0.0])
            np.testing.assert_array_equal(tb.nu2, [0.0, 0.0, 1.0])

    def test_3d_example(self):
        tb = tangent_basis((0.0, 0.0, 1.0))
        np.testing.assert_allclose(tb.nu1, [-1.0, 0.0, 0.0])
        np.testing.assert_allclose(tb.nu2, [0.0, 1.0, 0.0])

    @pytest.mark.parametrize("dim", [2, 3])
    def test_orthonormal_and_tangent(self, dim, rng):
        g = rng.normal(size=(200, dim))
        tv = tangent_vectors(g)
        gram = np.einsum("nik,nil->nkl", tv, tv)
        np.testing.assert_allclose(gram, np.broadcast_to(np.eye(dim - 1), gram.shape), atol=1e-12)
        np.testing.assert_allclose(np.einsum("ni,nik->nk", g, tv), 0.0, atol=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            tangent_basis((1.0, np.nan))


def test_scale_factor():
    assert scale_factor(0.3, 5.0, 1) == 1.0
    assert scale_factor(0.3, 0.6, 2) == pytest.approx(0.5)
    np.testing.assert_allclose(scale_factor(np.array([0.2, 0.4]), 0.4, 2), [0.5, 1.0])
    with pytest.raises(InvalidEnergyError):
        scale_factor(0.3, 0.0, 2)
    # p = 1 never looks at the energy
    assert scale_factor(0.3, 0.0, 1) == 1.0


def test_step_config_validation():
    with pytest.raises(ValueError):
        StepConfig(3, 0.0, 0.1)
    with pytest.raises(ValueError):
        StepConfig(2, 1.5, 0.1)
    with pytest.raises(ValueError):
        StepConfig(2, 0.5, 0.0)
    assert StepConfig(1, 0.0, 0.25).fallback_threshold == pytest.approx(2.5e-4)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("kind", ["q1", "weno"])
def test_identity_step(dim, kind, rng, backend):
    g = Grid((0.0,) * dim, 0.1, (12,) * dim)
    X = g.mesh()
    phi = np.sin(4 * X[0]) * np.cos(3 * X[1]) * 0.2
    f, dist = make(g, phi, np.full(g.dims, 0.37))
    band = narrow_band(f, 0.4)
    out = sl_step(f, dist, band, StepConfig(2, 0.0, 0.025, kind), E_p=0.5)
    assert np.max(np.abs(out.values - phi)) <= 1e-12


def test_fallback_threshold_is_sharp():
    g = Grid((0.0, 0.0), 1.0, (8, 8))
    cfg = StepConfig(1, 1.0, 0.25)
    thr = cfg.fallback_threshold
    X, Y = g.mesh()
    for slope, expect in [(thr * (1 - 1e-9), True), (thr * (1 + 1e-9), False)]:
        f, dist = make(g, slope * X, np.full(g.dims, 1.0))
        band = narrow_band(f, 1.0)
        ft = characteristic_feet(f, dist, band, cfg, 1.0)
        assert np.all(ft.fallback == expect)


def test_fallback_uses_neighbour_mean():
    g = Grid((0.0, 0.0), 1.0, (8, 8))
    X, Y = g.mesh()
    # flat except one dip at (3, 3), where the centered gradient vanishes
    phi = np.full(g.dims, 0.5)
    phi[3, 3] = 0.1
    f, dist = make(g, phi, np.ones(g.dims))
    band = narrow_band(f, 10.0)
    cfg = StepConfig(1, 0.0, 0.25, "q1", BandParams(10.0, 5.0))
    out = sl_step(f, dist, band, cfg, 1.0)
    assert out.values[3, 3] == pytest.approx(0.5)


def test_advection_moves_towards_cloud():
    # d = |x - 0.5| on a line cloud: the step transports phi along +grad d
    g = Grid((0.0, 0.0), 0.05, (21, 21))
    X, Y = g.mesh()
    d = np.abs(X - 0.5)
    phi = X - 0.2
    f, dist = make(g, phi, d)
    band = narrow_band(f, 1.0)
    cfg = StepConfig(1, 0.0, 0.0125, "q1", BandParams(1.0, 0.5))
    out = sl_step(f, dist, band, cfg, 1.0)
    i = 6  # x = 0.3, left of the cloud, grad d = -1
    assert out.values[i, 10] == pytest.approx(phi[i, 10] - 0.0125, abs=1e-12)


def test_3d_diffusion_cancels_for_affine(rng):
    g = Grid((0.0, 0.0, 0.0), 0.1, (14, 14, 14))
    X, Y, Z = g.mesh()
    a = np.array([0.3, -0.8, 0.5])
    phi = a[0] * X + a[1] * Y + a[2] * Z - 0.2
    d = 0.1 + 0.1 * X ** 2 + 0.05 * Y
    f, dist = make(g, phi, d)
    band = narrow_band(f, 0.3)
    # keep every foot strictly inside the hull so no clamping happens
    keep = np.zeros(g.dims, bool)
    keep[3:-3, 3:-3, 3:-3] = True
    band.state[~keep] = 0
    cfg = StepConfig(2, 1.0, 0.025, "q1", BandParams(0.6, 0.3))
    ft = characteristic_feet(f, dist, band, cfg, 0.5)
    base = ft.points.mean(axis=1)
    # symmetric tangential displacements: zero mean, and orthogonal to grad phi
    disp = ft.points - base[:, None, :]
    assert np.max(np.abs(disp @ a)) <= 1e-10
    out = sl_step(f, dist, band, cfg, 0.5)
    ref = make(g, phi, d)[0]
    from slrecon.interp import interp_points
    adv = interp_points("q1", ref, base)
    assert np.max(np.abs(out.values[ft.nodes] - adv)) <= 1e-10


def test_cutoff_leaves_far_nodes():
    g = Grid((0.0, 0.0), 0.1, (10, 10))
    X, Y = g.mesh()
    phi = X - 0.45
    f, dist = make(g, phi, np.abs(X - 0.3))
    band = narrow_band(f, 0.4)
    out = sl_step(f, dist, band, StepConfig(1, 0.0, 0.025, "q1", BandParams(0.4, 0.2)), 1.0)
    np.testing.assert_array_equal(out.values[~band.active], phi[~band.active])


def test_nonfinite_raises():
    g = Grid((0.0, 0.0), 0.1, (10, 10))
    X, Y = g.mesh()
    phi = X - 0.45
    d = np.abs(X - 0.3)
    d[4, 4] = np.nan
    f, dist = make(g, phi, d)
    with pytest.raises(NumericalFailure):
        sl_step(f, dist, narrow_band(f, 0.4), StepConfig(2, 0.0, 0.025), 1.0)
