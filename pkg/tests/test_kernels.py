import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardylab.errors import SingularityError
from hardylab.kernels import (calibration_drift, cancellation_check, cancellation_residual,
                              d_coefficient, decay_check, decay_slope, diff_kernel,
                              diff_kernel_e1, gamma_n, riesz_kernel, rotation_identity_rhs,
                              script_K, script_K_bound, whole_space_residual)


def exact_d(n, alpha):
    """Normalizing constant of the hypersingular integral in closed form (mpmath)."""
    d = 2 * mpmath.gamma(1 - alpha) * mpmath.cos(mpmath.pi * alpha / 2) / alpha
    if n == 2:
        d *= mpmath.beta(0.5, (1 + alpha) / 2)
    return float(d)


def test_gamma_n_values():
    assert gamma_n(1, 0.5) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-15)
    assert gamma_n(2, 1.0) == pytest.approx(2 * math.pi, rel=1e-15)
    ref = mpmath.sqrt(2) * mpmath.pi * mpmath.gamma(0.25) / mpmath.gamma(0.75)
    assert gamma_n(2, 0.5) == pytest.approx(float(ref), rel=1e-14)
    with pytest.raises(ValueError):
        gamma_n(1, 1.0)


def test_riesz_kernel_value_and_singularity():
    assert riesz_kernel(1, 0.5, 1.0)[()] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    with pytest.raises(SingularityError):
        riesz_kernel(2, 0.5, [0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.05, 20), st.floats(0.1, 0.9))
def test_riesz_kernel_radial_and_homogeneous(a, b, t, alpha):
    x = np.array([a, b])
    if np.linalg.norm(x) < 1e-3:
        return
    k = riesz_kernel(2, alpha, x)[()]
    assert riesz_kernel(2, alpha, -x)[()] == k
    assert riesz_kernel(2, alpha, t * x)[()] == pytest.approx(t ** (alpha - 2) * k, rel=1e-12)


def test_diff_kernel_two_term_value():
    assert diff_kernel_e1(1, 0.5, 1, 2.0)[()] == pytest.approx(
        (2 ** -0.5 - 1) / math.sqrt(2 * math.pi), rel=1e-14)
    assert diff_kernel_e1(1, 0.5, 1, 2.0)[()] == pytest.approx(-0.11684, abs=1e-5)


def test_diff_kernel_against_direct_formulas():
    rng = np.random.default_rng(3)
    n, a = 2, 0.4
    g = gamma_n(n, a)
    x = rng.uniform(-4, 4, (100, n))
    e1 = np.array([1.0, 0.0])
    r = lambda v: np.linalg.norm(v, axis=-1) ** (a - n)
    np.testing.assert_allclose(diff_kernel_e1(n, a, 1, x), (r(x) - r(x - e1)) / g, rtol=1e-12)
    np.testing.assert_allclose(diff_kernel_e1(n, a, 2, x),
                               (r(x) - 2 * r(x - e1) + r(x - 2 * e1)) / g, rtol=1e-11,
                               atol=1e-14)
    np.testing.assert_array_equal(diff_kernel(n, a, 1, x, e1), diff_kernel_e1(n, a, 1, x))


def test_rotation_identity():
    rng = np.random.default_rng(5)
    x = rng.uniform(-3, 3, (100, 2))
    h = rng.uniform(-2, 2, (100, 2))
    for ell in (1, 2):
        lhs = diff_kernel(2, 0.5, ell, x, h)
        rhs = rotation_identity_rhs(2, 0.5, ell, x, h)
        assert np.max(np.abs(lhs - rhs) / np.abs(lhs)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10))
def test_diff_kernel_homogeneity_in_step(t):
    x = np.array([[1.3, -0.7], [2.0, 2.5]])
    h = np.array([0.4, 0.9])
    lhs = diff_kernel(2, 0.3, 1, t * x, t * h)
    np.testing.assert_allclose(lhs, t ** (0.3 - 2) * diff_kernel(2, 0.3, 1, x, h), rtol=1e-12)


def test_cancellation_one_dimension_is_exact():
    assert cancellation_residual(1, 0.5, 1, 3.0, quad_m=2 ** 14) < 1e-3
    assert cancellation_residual(1, 0.5, 1, 3.0) < 1e-14


def test_cancellation_two_dimensions_converges():
    res = [cancellation_residual(2, 0.5, 1, 2.0, q) for q in (4, 8, 16)]
    assert res[0] > res[1] > res[2]
    assert cancellation_check(2, 0.5, 1, 2.0).decreases
    with pytest.raises(ValueError):
        cancellation_residual(2, 0.5, 2, 2.0)


@pytest.mark.parametrize("n", [1, 2])
def test_whole_space_residual_decays_like_power(n):
    # the truncated integral falls off like R^(alpha - 1 - ell)
    c = [whole_space_residual(n, 0.5, 1, R) * R ** 1.5 for R in (100.0, 1000.0)]
    assert c[1] == pytest.approx(c[0], rel=1e-2)


def test_decay_check_and_slope():
    r = decay_check(1, 0.5, 1)
    assert r.holds
    assert abs(r.c_fit_doubled - r.c_fit) <= 0.05 * r.c_fit
    for n in (1, 2):
        for a in (0.25, 0.5, 0.75):
            assert abs(decay_slope(n, a) - (a - n - 1)) <= 0.05
    with pytest.raises(ValueError):
        decay_check(1, 0.5, 1, points=[[1.5]])


def test_averaged_kernel():
    d = exact_d(2, 0.5)
    assert np.isfinite(script_K_bound(2, 0.5, d_coeff=d))
    assert script_K_bound(2, 0.5, quad_m=64, d_coeff=d) == pytest.approx(
        script_K_bound(2, 0.5, quad_m=128, d_coeff=d), abs=1e-4)
    vals = [abs(script_K(2, 0.5, 1, r, d_coeff=d)) for r in (10.0, 100.0, 1000.0)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-10


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_calibrated_d_one_dimension(alpha):
    assert calibration_drift(1, alpha) < 0.01
    assert d_coefficient(1, alpha) == pytest.approx(exact_d(1, alpha), rel=5e-3)


def test_calibrated_d_two_dimensions():
    assert calibration_drift(2, 0.5) < 0.01
    assert d_coefficient(2, 0.5) == pytest.approx(exact_d(2, 0.5), rel=5e-3)
