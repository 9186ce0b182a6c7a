import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hardylab.errors import ResolutionError
from hardylab.exponent import ExponentField
from hardylab.grid_domain import (Ball, DomainSpec, Grid, GriddedFunction, Interval, chi_mask,
                                  slit_disk)
from hardylab.hardy import TestFamily
from hardylab.kernels import gamma_n
from hardylab.luxemburg import luxemburg_norm
from hardylab.operators import (a_eps_apply, a_omega, domination_check,
                                hypersingular_truncated, inversion_error,
                                marchaud_decomposition_residual, maximal, potential_far_field,
                                riesz_derivative, riesz_potential, weight_equivalence_check)

INTERVAL = DomainSpec(Interval(-1.0, 1.0), exterior_cone=True)
DISK = DomainSpec(Ball((0.0, 0.0), 1.0), exterior_cone=True)


def window(n, m):
    return Grid((-2.0,) * n, (4.0,) * n, m)


def gaussian(grid, sigma):
    r2 = sum(c ** 2 for c in grid.mesh())
    return GriddedFunction(grid, np.exp(-r2 / (2 * sigma ** 2)))


# potential

def test_potential_of_zero_and_linearity():
    g = window(1, 256)
    zero = GriddedFunction(g, np.zeros(g.shape))
    assert not np.any(riesz_potential(zero, 0.5).values)
    rng = np.random.default_rng(1)
    f, h = (GriddedFunction(g, rng.normal(size=g.shape)) for _ in range(2))
    lhs = riesz_potential(GriddedFunction(g, 2 * f.values - 3 * h.values), 0.5).values
    rhs = 2 * riesz_potential(f, 0.5).values - 3 * riesz_potential(h, 0.5).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())


def test_potential_of_indicator_closed_form():
    g = Grid((-1.0,), (4.0,), 1280)
    x = g.axes()[0]
    u = riesz_potential(GriddedFunction(g, ((x > 0) & (x < 1)).astype(float)), 0.5)
    i = int(np.argmin(np.abs(x - 2.0)))
    # int_0^1 |x - y|^(-1/2) dy = 2 (sqrt(x) - sqrt(x - 1)) for x > 1
    exact = 2 * (math.sqrt(x[i]) - math.sqrt(x[i] - 1)) / gamma_n(1, 0.5)
    assert u.values[i] == pytest.approx(exact, abs=1e-4)


@pytest.mark.parametrize("n,m", [(1, 200), (2, 24)])
def test_potential_fft_matches_direct(n, m):
    g = window(n, m)
    rng = np.random.default_rng(2)
    f = GriddedFunction(g, rng.normal(size=g.shape))
    a = riesz_potential(f, 0.4).values
    b = riesz_potential(f, 0.4, method="direct").values
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))


def test_far_field_matches_potential_outside():
    g = window(1, 512)
    phi = gaussian(g, 0.2)
    far = potential_far_field(phi, 0.5)
    z = np.array([[3.0], [-5.0], [20.0]])
    big = Grid((-24.0,), (48.0,), 512 * 12)
    ref = riesz_potential(GriddedFunction(big, g.embed(phi.values, big)), 0.5).values
    idx = np.rint((z[:, 0] - big.lower[0]) / big.spacing - 0.5).astype(int)
    # compare at the nearest cell centers of the large grid
    zc = big.axes()[0][idx][:, None]
    np.testing.assert_allclose(far(zc), ref[idx], rtol=1e-4)


# maximal function

def test_maximal_basic_properties():
    g = window(1, 256)
    c = GriddedFunction(g, np.full(g.shape, 2.5))
    M = maximal(c, INTERVAL)
    np.testing.assert_allclose(M.values[M.region()], 2.5, rtol=1e-14)
    rng = np.random.default_rng(4)
    for _ in range(5):
        f = GriddedFunction(g, rng.normal(size=g.shape))
        h = GriddedFunction(g, rng.normal(size=g.shape))
        Mf, Mh = maximal(f, INTERVAL).values, maximal(h, INTERVAL).values
        Mfh = maximal(GriddedFunction(g, f.values + h.values), INTERVAL).values
        chi = chi_mask(INTERVAL, g)
        assert np.all(Mf[chi] >= np.abs(f.values[chi]) * (1 - 1e-14))
        assert np.all(Mfh[chi] <= (Mf + Mh)[chi] * (1 + 1e-12))


# truncated hypersingular integral

def test_constant_sees_only_the_exterior():
    g = window(1, 1024)
    x = g.axes()[0]
    D = hypersingular_truncated(GriddedFunction(g, np.full(g.shape, 3.0)), 0.5,
                                4 * g.spacing, d_coeff=1.0).values
    # f = 3 on the window and 0 beyond: only the exterior contributes
    exact = 3 * ((2 - x) ** -0.5 + (2 + x) ** -0.5) / 0.5
    core = np.abs(x) <= 1
    assert np.max(np.abs(D - exact)[core] / exact[core]) < 1e-5


def test_truncated_linearity_and_resolution_guard():
    g = window(1, 256)
    rng = np.random.default_rng(6)
    f = GriddedFunction(g, rng.normal(size=g.shape))
    eps = 3 * g.spacing
    one = hypersingular_truncated(f, 0.5, eps, d_coeff=2.0).values
    two = hypersingular_truncated(f * 2, 0.5, eps, d_coeff=2.0).values
    np.testing.assert_allclose(two, 2 * one, rtol=1e-13, atol=1e-13)
    with pytest.raises(ResolutionError):
        hypersingular_truncated(f, 0.5, 1.5 * g.spacing, d_coeff=1.0)


def test_derivative_ladder_smooth_and_jump():
    g = window(1, 1024)
    h = g.spacing
    x = g.axes()[0]
    core = np.abs(x) <= 1
    phi = gaussian(g, 0.2)
    u = riesz_potential(phi, 0.5)
    eps = [8 * h, 4 * h, 2 * h]
    res = riesz_derivative(u, 0.5, eps, far_field=potential_far_field(phi, 0.5), region=core)
    assert res.converged
    res2 = riesz_derivative(u * 2, 0.5, eps, far_field=potential_far_field(phi * 2, 0.5),
                            region=core)
    for a, b in zip(res.table[1:], res2.table[1:]):
        assert b["distance"] == pytest.approx(2 * a["distance"], rel=1e-9)
    jump = GriddedFunction(g, (np.abs(x) < 0.5).astype(float))
    assert not riesz_derivative(jump, 0.75, eps, region=core).converged


def test_inversion_one_dimension():
    errs = {}
    for m in (1024, 2048):
        g = window(1, m)
        p = ExponentField.affine(g, [0.1], 1.6)
        errs[m] = inversion_error(gaussian(g, 0.2), 0.5, p).errors
    assert errs[2048][-1] < 0.05
    assert errs[2048][0] > errs[2048][1] > errs[2048][2]
    # halving h and eps_min together lowers the error
    assert errs[2048][-1] < errs[1024][-1]
    zero = GriddedFunction(window(1, 64), np.zeros(64))
    assert inversion_error(zero, 0.5).error == 0.0


# exterior weight

def test_weight_interval_closed_form():
    g = window(1, 1024)
    w = a_omega(INTERVAL, 0.5, g)
    x = g.axes()[0]
    exact = lambda t: ((1 - t) ** -0.5 + (1 + t) ** -0.5) / 0.5
    for x0 in (0.0, 0.5, -0.5):
        i = int(np.argmin(np.abs(x - x0)))
        assert w.values[i] == pytest.approx(exact(x[i]), abs=1e-4)
    i = int(np.argmin(np.abs(x)))
    assert w.values[i] == pytest.approx(4.0, abs=1e-4)
    # next to the boundary the near side dominates: alpha a delta^alpha -> 1
    chi = w.mask
    inner = np.flatnonzero(chi)
    for i in (inner[0], inner[-1]):
        delta = 1 - abs(x[i])
        ref = 1 + (delta / (2 - delta)) ** 0.5
        assert 0.5 * w.values[i] * delta ** 0.5 == pytest.approx(ref, rel=1e-2)


def test_weight_disk_center():
    # odd cell count puts a cell center at the origin
    g = window(2, 257)
    w = a_omega(DISK, 0.5, g)
    assert w.values[128, 128] == pytest.approx(2 * math.pi / 0.5, abs=1e-3)


def test_weight_equivalence_interval_is_tight():
    chk = weight_equivalence_check(INTERVAL, 0.5, window(1, 1024))
    assert chk.c1 == pytest.approx(4.0)
    assert chk.c1_holds
    assert chk.c1_ratio > 0.99


def test_weight_lower_constant_stable_on_disk():
    c2 = [weight_equivalence_check(DISK, 0.5, window(2, m)).c2_est for m in (128, 256)]
    assert all(np.isfinite(c2))
    assert abs(c2[1] - c2[0]) <= 0.1 * c2[1]


def test_weight_slit_domain_reports():
    dom = DomainSpec(slit_disk((0.0, 0.0), 1.0, 0.05))
    chk = weight_equivalence_check(dom, 0.5, window(2, 128))
    assert np.isfinite(chk.c2_est) and not chk.cone_declared


# decomposition and domination

def test_decomposition_residual():
    rel = []
    for m in (2048, 4096):
        g = window(1, m)
        rel.append(marchaud_decomposition_residual(gaussian(g, 0.2), INTERVAL, 0.5).relative)
    assert rel[0] < 1e-2
    assert rel[1] <= rel[0] / 2
    g = window(1, 256)
    zero = GriddedFunction(g, np.zeros(g.shape))
    assert marchaud_decomposition_residual(zero, INTERVAL, 0.5).residual == 0.0


def test_a_eps_zero_linearity_and_direct():
    g = window(1, 64)
    h = g.spacing
    zero = GriddedFunction(g, np.zeros(g.shape))
    assert not np.any(a_eps_apply(zero, INTERVAL, 0.5, 2 * h).values)
    rng = np.random.default_rng(8)
    f = GriddedFunction(g, rng.normal(size=g.shape))
    k = GriddedFunction(g, rng.normal(size=g.shape))
    s = GriddedFunction(g, f.values - 4 * k.values)
    lhs = a_eps_apply(s, INTERVAL, 0.5, 4 * h).values
    rhs = a_eps_apply(f, INTERVAL, 0.5, 4 * h).values - 4 * a_eps_apply(k, INTERVAL, 0.5, 4 * h).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-11 * np.abs(rhs).max())
    direct = a_eps_apply(f, INTERVAL, 0.5, 4 * h, method="direct").values
    np.testing.assert_allclose(rhs + 4 * a_eps_apply(k, INTERVAL, 0.5, 4 * h).values, direct,
                               atol=1e-11 * np.abs(direct).max())


def test_a_eps_center_against_fine_grid():
    vals = []
    for m in (1024, 4096):
        g = window(1, m)
        x = g.axes()[0]
        A = a_eps_apply(gaussian(g, 0.15), INTERVAL, 0.5, 0.0625).values
        vals.append(A[int(np.argmin(np.abs(x - g.spacing / 2)))])
    assert vals[0] == pytest.approx(vals[1], rel=1e-2)


def test_domination_interval_and_monotone_envelope():
    g = window(1, 1024)
    h = g.spacing
    chi = chi_mask(INTERVAL, g)
    bumps = [mem.sample(g, chi) for mem in TestFamily("bump", 20, 42).members(INTERVAL)]
    eps = [16 * h, 8 * h, 4 * h]
    r = domination_check(INTERVAL, 0.5, bumps, eps)
    assert r.uniform
    x = g.axes()[0]
    rough = GriddedFunction(g, np.where(chi, np.sign(np.sin(40 * x)), 0.0))
    r2 = domination_check(INTERVAL, 0.5, bumps + [rough], eps)
    assert r2.C_est >= r.C_est


def test_domination_constant_function():
    g = window(1, 1024)
    h = g.spacing
    one = GriddedFunction(g, np.ones(g.shape))
    M = maximal(GriddedFunction(g, one.values, chi_mask(INTERVAL, g)), INTERVAL)
    np.testing.assert_allclose(M.values[M.region()], 1.0, rtol=1e-14)
    r = domination_check(INTERVAL, 0.5, [one], [16 * h, 8 * h, 4 * h])
    A = a_eps_apply(one, INTERVAL, 0.5, 4 * h).values[M.region()]
    assert np.all(np.isfinite(A))
    assert np.max(np.abs(A)) <= r.C_est * (1 + 1e-12)
