"""Riesz kernel, finite-difference kernels and their integral identities.

Notation: ``k(x) = |x|^(alpha-n) / gamma_n(alpha)`` is the Riesz kernel and
``k_ell(x) = sum_k (-1)^k C(ell, k) k(x - k e1)`` its ell-th forward
difference with step e1.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import CalibrationError, SingularityError

__all__ = [
    "KernelParams", "gamma_n", "sphere_area", "riesz_kernel", "diff_kernel_e1",
    "diff_kernel", "rotation_identity_rhs", "ball_power_integral",
    "cancellation_residual", "cancellation_check", "CancellationResult",
    "whole_space_residual", "decay_slope", "decay_check",
    "DecayResult", "script_K", "script_K_bound", "d_coefficient", "calibrate_d",
    "calibration_drift",
]


def gamma_n(n: int, alpha: float) -> float:
    """Normalizing constant 2^alpha pi^(n/2) Gamma(alpha/2) / Gamma((n-alpha)/2)."""
    if not 0 < alpha < n:
        raise ValueError(f"gamma_n needs 0 < alpha < n, got alpha={alpha}, n={n}")
    return 2.0 ** alpha * math.pi ** (n / 2) * math.gamma(alpha / 2) / math.gamma((n - alpha) / 2)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class KernelParams:
    n: int
    alpha: float
    ell: int = 1
    d_coeff: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha < min(1, self.n):
            raise ValueError("alpha must lie in (0, min(1, n))")
        if self.ell < 1 or int(self.ell) != self.ell:
            raise ValueError("ell must be a positive integer")
        if self.d_coeff is None:
            object.__setattr__(self, "d_coeff", d_coefficient(self.n, self.alpha, self.ell))
        if not (np.isfinite(self.d_coeff) and self.d_coeff != 0):
            raise ValueError("d_coeff must be finite and nonzero")


def _points(n, x):
    x = np.asarray(x, dtype=float)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != n:
        raise ValueError(f"expected points in R^{n}")
    return x


def _power(n, alpha, x):
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularityError("kernel evaluated at a singular node")
    return r ** (alpha - n)


def riesz_kernel(n: int, alpha: float, x) -> np.ndarray:
    """|x|^(alpha-n) / gamma_n(alpha); raises SingularityError at x = 0."""
    return _power(n, alpha, _points(n, x)) / gamma_n(n, alpha)


def diff_kernel(n: int, alpha: float, ell: int, x, h) -> np.ndarray:
    """Forward difference of order ``ell`` with step ``h`` of the Riesz kernel at ``x``."""
    x = _points(n, x)
    h = _points(n, h)
    out = 0.0
    for k in range(ell + 1):
        out = out + (-1) ** k * math.comb(ell, k) * _power(n, alpha, x - k * h)
    return out / gamma_n(n, alpha)


def diff_kernel_e1(n: int, alpha: float, ell: int, x) -> np.ndarray:
    """The difference kernel with step e1."""
    e1 = np.zeros(n)
    e1[0] = 1.0
    return diff_kernel(n, alpha, ell, x, e1)


def _rotation_to(u):
    """Orthogonal matrix R with R e1 = u for a unit vector u (a rotation for n >= 2)."""
    n = u.shape[-1]
    if n == 1:
        return np.array([[u[0]]])
    if n == 2:
        return np.array([[u[0], -u[1]], [u[1], u[0]]])
    e1 = np.zeros(n)
    e1[0] = 1.0
    v = np.cross(e1, u)
    s, c = np.linalg.norm(v), u[0]
    if s < 1e-15:
        return np.eye(n) if c > 0 else np.diag([-1.0, -1.0] + [1.0] * (n - 2))
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx * ((1 - c) / s ** 2)


def rotation_identity_rhs(n: int, alpha: float, ell: int, x, h) -> np.ndarray:
    """Right side of the rotation identity for the difference kernel.

    ``|h|^(alpha-n) k_ell((|x| / |h|^2) rot_x^{-1} h)`` where ``rot_x`` is a
    rotation taking e1 to x/|x|.  Equal to :func:`diff_kernel` ``(x, h)``.
    """
    x = _points(n, x)
    h = _points(n, h)
    x2 = np.atleast_2d(x)
    h2 = np.broadcast_to(np.atleast_2d(h), x2.shape)
    out = np.empty(len(x2))
    for i, (xi, hi) in enumerate(zip(x2, h2)):
        rx = np.linalg.norm(xi)
        hn = np.linalg.norm(hi)
        z = (rx / hn ** 2) * (_rotation_to(xi / rx).T @ hi)
        out[i] = hn ** (alpha - n) * diff_kernel_e1(n, alpha, ell, z)[()]
    return out.reshape(x.shape[:-1])


def _ball_directions(n, v, N, q):
    """Quadrature over directions for a ball integral seen from a point at offset v."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n != 2:
        raise NotImplementedError("ball integrals are implemented for n = 1, 2")
    t, w = special.roots_legendre(q)
    dist = float(np.linalg.norm(v))
    if dist < N:
        th = math.pi * (t + 1)
        return np.stack([np.cos(th), np.sin(th)], 1), math.pi * w
    # only directions inside the tangent cone hit the ball
    half = math.asin(min(N / dist, 1.0))
    mid = math.atan2(-v[1], -v[0])
    th = mid + half * t
    return np.stack([np.cos(th), np.sin(th)], 1), half * w


def ball_power_integral(n: int, alpha: float, a, c, N: float, q: int = 64) -> float:
    """Integral of |y - a|^(alpha-n) over the ball B(c, N).

    In polar coordinates about ``a`` the radial integral is exact, leaving
    ``(1/alpha) * int_S (t2^alpha - t1^alpha) dS`` over directions, where
    [t1, t2] is the chord of the ball along each direction.  For n = 1 this
    is exact; for n = 2 the angular integral uses ``q`` Gauss-Legendre nodes.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    v = a - c
    dirs, w = _ball_directions(n, v, N, q)
    b = dirs @ v
    disc = b * b - (v @ v - N * N)
    sq = np.sqrt(np.maximum(disc, 0.0))
    t2 = np.maximum(-b + sq, 0.0)
    t1 = np.maximum(-b - sq, 0.0)
    vals = np.where(disc > 0, (t2 ** alpha - t1 ** alpha) / alpha, 0.0)
    return float(w @ vals)


def _diff_ball(n, alpha, ell, center, N, q):
    """(signed sum, sum of magnitudes) of the difference kernel integrated over B(center, N)."""
    g = gamma_n(n, alpha)
    total, scale = [], 0.0
    for k in range(ell + 1):
        node = np.zeros(n)
        node[0] = k
        val = math.comb(ell, k) * ball_power_integral(n, alpha, node, center, N, q) / g
        total.append((-1) ** k * val)
        scale += abs(val)
    return math.fsum(total), scale


def cancellation_residual(n: int, alpha: float, ell: int, N: float, quad_m: int = 16) -> float:
    """|integral of k_ell over the ball of radius N centered at (ell/2) e1|.

    The identity holds exactly for odd ``ell``; the return value is pure
    quadrature error.  ``quad_m`` is the number of angular nodes for n = 2
    (n = 1 is integrated exactly).
    """
    if ell % 2 == 0:
        raise ValueError("the shifted-ball cancellation is stated for odd ell only")
    if N <= 0:
        raise ValueError("N must be positive")
    center = np.zeros(n)
    center[0] = ell / 2
    return abs(_diff_ball(n, alpha, ell, center, N, quad_m)[0])


class CancellationResult(NamedTuple):
    residual: float
    residual_refined: float
    floor: float
    decreases: bool


def cancellation_check(n: int, alpha: float, ell: int, N: float,
                       quad_m: int = 16) -> CancellationResult:
    """Cancellation residual at ``quad_m`` nodes and at four times as many.

    ``decreases`` is True when the refined residual is smaller, or when both
    sit at the rounding floor (64 machine epsilons times the summed
    magnitudes of the terms), where no further decrease is measurable.
    """
    r = cancellation_residual(n, alpha, ell, N, quad_m)
    r4 = cancellation_residual(n, alpha, ell, N, 4 * quad_m)
    center = np.zeros(n)
    center[0] = ell / 2
    scale = _diff_ball(n, alpha, ell, center, N, 4 * quad_m)[1]
    floor = float(64 * np.finfo(float).eps * scale)
    return CancellationResult(r, r4, floor, bool(r4 < r or max(r, r4) <= floor))


def whole_space_residual(n: int, alpha: float, ell: int, R: float, quad_m: int = 64) -> float:
    """|integral of k_ell over the ball of radius R centered at 0|.

    Tends to zero like R^(alpha-ell) as R grows, for every ell >= 1.
    """
    return abs(_diff_ball(n, alpha, ell, np.zeros(n), R, quad_m)[0])


def decay_slope(n: int, alpha: float, r_min: float = 2.0, r_max: float = 50.0,
                count: int = 200) -> float:
    """Least-squares slope of log|k_1(x)| against log|x| along x = +-r e1.

    Points on both sides of the two nodes are pooled, which cancels the
    leading asymmetric correction of the one-sided fits.
    """
    r = np.geomspace(r_min, r_max, count)
    e1 = np.zeros(n)
    e1[0] = 1.0
    pts = np.concatenate([r[:, None] * e1, -r[:, None] * e1])
    k = np.abs(diff_kernel_e1(n, alpha, 1, pts))
    return float(np.polyfit(np.log(np.concatenate([r, r])), np.log(k), 1)[0])


class DecayResult(NamedTuple):
    c_fit: float
    c_fit_doubled: float
    holds: bool


def _decay_samples(n, ell, samples, r_max):
    r = np.geomspace(ell + 1, r_max, samples)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        th = (np.arange(8) + 0.5) * math.pi / 4
        dirs = np.stack([np.cos(th), np.sin(th)] + [np.zeros(8)] * (n - 2), 1)
    return (r[:, None, None] * dirs[None]).reshape(-1, n)


def _c_fit(n, alpha, ell, pts):
    r = np.linalg.norm(pts, axis=-1)
    if np.any(r < (ell + 1) * (1 - 1e-12)):
        raise ValueError(f"decay samples must satisfy |x| >= ell + 1 = {ell + 1}")
    k = np.abs(diff_kernel_e1(n, alpha, ell, pts))
    return float(np.max(k * (1 + r) ** (n + ell - alpha)))


def decay_check(n: int, alpha: float, ell: int = 1, samples: int = 200,
                points=None, r_max: float = 1e3, tol: float = 0.05) -> DecayResult:
    """Fit c in |k_ell(x)| <= c (1 + |x|)^(alpha-n-ell) on |x| >= ell + 1.

    ``c_fit`` is the largest ratio over the samples.  The check holds when
    doubling the number of sample radii changes ``c_fit`` by less than ``tol``.
    Explicit ``points`` may be given instead of the default radial sweep.
    """
    if points is not None:
        pts = np.atleast_2d(_points(n, points))
        c = _c_fit(n, alpha, ell, pts)
        return DecayResult(c, c, bool(np.isfinite(c)))
    c1 = _c_fit(n, alpha, ell, _decay_samples(n, ell, samples, r_max))
    c2 = _c_fit(n, alpha, ell, _decay_samples(n, ell, 2 * samples, r_max))
    holds = bool(np.isfinite(c1) and abs(c2 - c1) <= tol * c1)
    return DecayResult(c1, c2, holds)


def script_K(n: int, alpha: float, ell: int, r: float, quad_m: int = 64,
             d_coeff: float | None = None) -> float:
    """Averaged kernel ``(1 / (d r^n)) * integral of k_ell over |y| < r``."""
    if r <= 0:
        raise ValueError("r must be positive")
    d = d_coefficient(n, alpha, ell) if d_coeff is None else d_coeff
    return _diff_ball(n, alpha, ell, np.zeros(n), r, quad_m)[0] / (d * r ** n)


def script_K_bound(n: int, alpha: float, ell: int = 1, radii=None, quad_m: int = 64,
                   d_coeff: float | None = None) -> float:
    """Largest |script_K(r)| r^(n-alpha) over ``radii`` (default: 64 radii in (0, 1])."""
    radii = np.geomspace(1e-3, 1.0, 64) if radii is None else np.asarray(radii, dtype=float)
    vals = [abs(script_K(n, alpha, ell, r, quad_m, d_coeff)) * r ** (n - alpha) for r in radii]
    return float(max(vals))


# calibration of the hypersingular normalizing constant

CALIBRATION_SIGMA = 0.25
CALIBRATION_HALF_WIDTH = 2.0
CALIBRATION_LADDER = {1: (2048, 4096), 2: (128, 256)}
CALIBRATION_EPS = (2, 4)
CALIBRATION_DRIFT = 0.01


def calibrate_d(n: int, alpha: float, m: int, eps_cells: int) -> float:
    """Scalar d fitted so that the discrete D_eps I^alpha g reproduces g.

    g is a Gaussian of width 0.25 on the window [-2, 2]^n sampled with ``m``
    cells per axis and padded by m/8 cells; beyond the padded window the
    potential is continued by direct evaluation.  The raw difference sum
    ``u = d * D_eps I^alpha g`` is completed with the leading Taylor term of
    the excluded ball, ``-(lap u / 2n) |S^(n-1)| eps^(2-alpha) / (2-alpha)``,
    so that the fit refers to the eps -> 0 operator.  The fitted value is
    ``<u, g> / <g, g>`` over the unpadded window.
    """
    from .grid_domain import Grid, GriddedFunction
    from .operators import (far_field_correction, hypersingular_truncated,
                            potential_far_field, riesz_potential)

    L = CALIBRATION_HALF_WIDTH
    grid = Grid((-L,) * n, (2 * L,) * n, m)
    big = grid.padded(m // 8)
    h = big.spacing
    eps = eps_cells * h
    r2 = sum(c ** 2 for c in big.mesh())
    g = GriddedFunction(big, np.exp(-r2 / (2 * CALIBRATION_SIGMA ** 2)))
    u = riesz_potential(g, alpha)
    inner = grid.embed(np.ones(grid.shape), big) > 0
    far = far_field_correction(big, alpha, potential_far_field(g, alpha), where=inner)
    raw = hypersingular_truncated(u, alpha, eps, d_coeff=1.0).values - far
    lap = sum(np.roll(u.values, 1, k) - 2 * u.values + np.roll(u.values, -1, k)
              for k in range(n)) / h ** 2
    raw = raw - lap / (2 * n) * sphere_area(n) * eps ** (2 - alpha) / (2 - alpha)
    gv, uv = g.values[inner], raw[inner]
    return math.fsum((gv * uv).tolist()) / math.fsum((gv * gv).tolist())


@functools.lru_cache(maxsize=None)
def _calibration_fits(n, alpha):
    ladder = CALIBRATION_LADDER.get(n)
    if ladder is None:
        raise ValueError("calibration is available for n = 1, 2")
    return tuple(calibrate_d(n, alpha, m, e) for m in ladder for e in CALIBRATION_EPS)


def calibration_drift(n: int, alpha: float) -> float:
    """Largest relative deviation of the calibration fits from the returned one."""
    fits = np.array(_calibration_fits(n, float(alpha)))
    best = fits[-len(CALIBRATION_EPS)]
    return float(np.max(np.abs(fits - best)) / abs(best))


@functools.lru_cache(maxsize=None)
def d_coefficient(n: int, alpha: float, ell: int = 1) -> float:
    """Normalizing constant of the hypersingular integral, by calibration.

    The constant is fitted with :func:`calibrate_d` on two resolutions and two
    truncation radii (2h and 4h); all four fits must agree within 1%.  The
    fit at the finest resolution and smallest radius is returned.

    Raises
    ------
    CalibrationError
        If the fits drift apart by more than 1%.
    """
    if ell != 1:
        raise ValueError("the calibration is implemented for ell = 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    drift = calibration_drift(n, alpha)
    if drift > CALIBRATION_DRIFT:
        raise CalibrationError(f"d calibration drifts by {drift:.3%} for n={n}, alpha={alpha}")
    return float(_calibration_fits(n, float(alpha))[-len(CALIBRATION_EPS)])
