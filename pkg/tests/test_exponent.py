import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardylab.exponent import (ExponentField, class_P_check, conjugate, log_condition_check,
                               regular_extension, sobolev_exponent)
from hardylab.grid_domain import DomainSpec, Grid, Interval, chi_mask

UNIT = Grid((0.0,), (1.0,), 1024)


def test_class_P_constant_and_affine():
    assert tuple(class_P_check(ExponentField.constant(UNIT, 2.0))) == (2.0, 2.0, True)
    r = class_P_check(ExponentField.affine(UNIT, [1.0], 2.0))
    assert r.in_class
    assert r.p_minus == pytest.approx(2.0, abs=1e-3)
    assert r.p_plus == pytest.approx(3.0, abs=1e-3)
    assert not class_P_check(ExponentField.constant(UNIT, 1.0)).in_class


def test_log_condition_constant_is_zero():
    assert log_condition_check(ExponentField.constant(UNIT, 2.5)).C_est == 0.0


def test_log_condition_affine_bounded_by_t_log_t():
    # |p(x)-p(y)| ln(1/|x-y|) = t ln(1/t) with t = |x-y|; its sup is 1/e
    r = log_condition_check(ExponentField.affine(UNIT, [1.0], 2.0))
    assert r.satisfied
    assert r.C_est <= 1 / math.e + 1e-12
    assert r.C_est > 0.99 / math.e
    with pytest.raises(ValueError):
        log_condition_check(ExponentField.affine(UNIT, [1.0], 2.0), pair_budget=100)


def test_log_condition_profile_plateaus():
    # p = 2 + 1/ln(e/|x|) is log-Hoelder at 0 with a finite constant; the
    # estimate grows slowly with resolution and stays bounded
    ests = []
    for m in (256, 1024, 4096):
        g = Grid((-1.0,), (2.0,), m)
        p = ExponentField.from_function(g, lambda z: 2 + 1 / np.log(math.e / np.abs(z[..., 0])))
        ests.append(log_condition_check(p).C_est)
    assert ests[0] <= ests[1] <= ests[2] < 1.0
    assert ests[2] - ests[1] < 0.1


def test_conjugate_values():
    assert np.all(conjugate(ExponentField.constant(UNIT, 2.0)).values == 2.0)
    np.testing.assert_allclose(conjugate(ExponentField.constant(UNIT, 3.0)).values, 1.5,
                               rtol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.01, 10.0), st.floats(-0.5, 0.5))
def test_conjugate_is_involution(offset, slope):
    p = ExponentField.affine(UNIT, [slope], offset + 0.5)
    pp = conjugate(conjugate(p))
    np.testing.assert_allclose(pp.values, p.values, rtol=1e-14, atol=0)


def test_sobolev_exponent():
    g = Grid((0.0, 0.0), (1.0, 1.0), 8)
    np.testing.assert_allclose(sobolev_exponent(ExponentField.constant(g, 2.0), 0.5).values, 4.0)
    np.testing.assert_allclose(sobolev_exponent(ExponentField.constant(g, 3.0), 0.5).values, 12.0)
    p = ExponentField.affine(g, [0.3, 0.2], 1.7)
    np.testing.assert_allclose(sobolev_exponent(p, 1e-12).values, p.values, rtol=1e-10)
    with pytest.raises(ValueError):
        sobolev_exponent(ExponentField.constant(g, 4.0), 0.5)


def test_regular_extension_constant():
    g = Grid((-1.0,), (3.0,), 300)
    dom = DomainSpec(Interval(0.0, 1.0))
    p = ExponentField.constant(g, 2.0, chi_mask(dom, g))
    assert np.all(regular_extension(p, dom).values == 2.0)


def test_regular_extension_projection_clamps_to_end_values():
    g = Grid((-1.0,), (3.0,), 300)
    dom = DomainSpec(Interval(0.0, 1.0))
    p = ExponentField.affine(g, [1.0], 2.0, chi_mask(dom, g))
    ext = regular_extension(p, dom, mode="projection")
    x = g.axes()[0]
    assert ext.values[np.argmin(np.abs(x + 0.5))] == 2.0
    assert ext.values[np.argmin(np.abs(x - 1.5))] == 3.0
    assert ext.func(np.array([[-0.5]]))[0] == 2.0
    assert ext.func(np.array([[1.5]]))[0] == 3.0


def test_regular_extension_keeps_range():
    g = Grid((-1.0,), (3.0,), 300)
    dom = DomainSpec(Interval(0.0, 1.0))
    chi = chi_mask(dom, g)
    rng = np.random.default_rng(7)
    for _ in range(50):
        slope, off = rng.uniform(-1, 1), rng.uniform(1.5, 3)
        p = ExponentField.affine(g, [slope], off, chi)
        ext = regular_extension(p, dom, pair_budget=10_000)
        assert ext.p_plus == p.p_plus
        assert ext.p_minus == p.p_minus
        assert ext.log_inflation <= 1.0 + 1e-12
