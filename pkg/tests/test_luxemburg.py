import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from hardylab.exponent import ExponentField
from hardylab.grid_domain import Grid, GriddedFunction
from hardylab.luxemburg import luxemburg_bracket, luxemburg_norm, modular, modular_norm_bracket

UNIT = Grid((0.0,), (1.0,), 1024)


def const(c, grid=UNIT):
    return GriddedFunction(grid, np.full(grid.shape, float(c)))


def test_modular_constants():
    assert modular(const(1), 2.0) == pytest.approx(1.0, rel=1e-15)
    assert modular(const(2), 2.0) == pytest.approx(4.0, rel=1e-15)
    assert modular(const(0), 2.0) == 0.0


def test_modular_variable_exponent_against_quad():
    x = UNIT.axes()[0]
    p = ExponentField.affine(UNIT, [1.0], 2.0)
    ref = integrate.quad(lambda t: t ** (2 + t), 0, 1, epsabs=0, epsrel=1e-13)[0]
    # midpoint rule: error below h^2/24 * max|f''| with max|f''| < 10 on (0,1)
    assert abs(modular(GriddedFunction(UNIT, x), p) - ref) < 10 * UNIT.spacing ** 2 / 24


def test_norm_of_one_is_one():
    assert luxemburg_norm(const(1), 2.0) == pytest.approx(1.0, rel=1e-10)


def test_norm_of_constant_ignores_exponent():
    # (a/lam)^p(x) is above 1 everywhere or below 1 everywhere unless lam = a
    p = ExponentField.affine(UNIT, [1.0], 2.0)
    assert luxemburg_norm(const(1), p) == pytest.approx(1.0, rel=1e-9)
    assert luxemburg_norm(const(2), p) == pytest.approx(2.0, rel=1e-9)


def test_norm_variable_exponent_against_quad_root():
    p = ExponentField.affine(UNIT, [1.0], 2.0)
    rho = lambda lam: integrate.quad(lambda t: (t / lam) ** (2 + t), 0, 1,
                                     epsabs=0, epsrel=1e-13)[0]
    lam_star = optimize.brentq(lambda lam: rho(lam) - 1, 0.1, 1.0, xtol=1e-14, rtol=1e-14)
    got = luxemburg_norm(GriddedFunction(UNIT, UNIT.axes()[0]), p)
    assert got == pytest.approx(lam_star, rel=1e-6)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_constant_p_matches_classical_norm(p):
    rng = np.random.default_rng(11)
    for _ in range(10):
        v = rng.normal(size=UNIT.shape) * 10.0 ** rng.uniform(-3, 3)
        exact = (math.fsum((np.abs(v) ** p).tolist()) * UNIT.spacing) ** (1 / p)
        assert luxemburg_norm(GriddedFunction(UNIT, v), p) == pytest.approx(exact, rel=1e-9)


def test_bracket_properties():
    f = GriddedFunction(UNIT, np.sin(7 * UNIT.axes()[0]))
    p = ExponentField.affine(UNIT, [1.5], 1.5)
    lo, hi = luxemburg_bracket(f, p, rel_tol=1e-6)
    assert modular(f * (1 / lo), p) > 1 >= modular(f * (1 / hi), p)
    assert hi / lo - 1 <= 1e-6
    with pytest.raises(ValueError):
        luxemburg_bracket(f, p, rel_tol=0.1)
    assert luxemburg_bracket(const(0), p) == (0.0, 0.0)


def test_bracket_collapses_at_unit_norm():
    p = ExponentField.affine(UNIT, [1.0], 2.0)
    b = modular_norm_bracket(const(1), p)
    assert b.holds
    assert b.norm == pytest.approx(1.0, rel=1e-10)
    assert b.modular == pytest.approx(1.0, rel=1e-14)
    assert b.lower == pytest.approx(b.upper, rel=1e-8)


def test_bracket_equality_case():
    b = modular_norm_bracket(const(2), ExponentField.constant(UNIT, 2.0))
    assert b.holds
    assert (b.sigma, b.theta) == (2.0, 2.0)
    assert b.lower == pytest.approx(4.0, rel=1e-9)
    assert b.upper == pytest.approx(4.0, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(1.05, 3.0), st.floats(-0.5, 2.0), st.integers(0, 2 ** 32 - 1))
def test_bracket_holds_randomly(log_amp, offset, slope, seed):
    g = Grid((0.0,), (1.0,), 128)
    rng = np.random.default_rng(seed)
    f = GriddedFunction(g, 10.0 ** log_amp * rng.normal(size=g.shape))
    p = ExponentField.affine(g, [slope], offset + max(0.0, -slope))
    assert modular_norm_bracket(f, p).holds


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 2 ** 32 - 1))
def test_norm_is_homogeneous(c, seed):
    g = Grid((0.0,), (1.0,), 128)
    rng = np.random.default_rng(seed)
    f = GriddedFunction(g, rng.normal(size=g.shape))
    p = ExponentField(g, rng.uniform(1.1, 4.0, g.shape))
    assert luxemburg_norm(f * c, p) == pytest.approx(c * luxemburg_norm(f, p), rel=1e-9)
