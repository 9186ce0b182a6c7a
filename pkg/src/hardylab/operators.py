"""Discrete Riesz potential, maximal operator, truncated hypersingular
integral, the exterior weight a_Omega and the operator A_eps.

All operators act on isotropic grids (equal cell size on every axis).  Lattice
convolutions are evaluated with FFTs; a direct O(N^2) path is kept for the
potential and for A_eps as an independent check.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, special
from scipy.signal import fftconvolve

from .errors import ResolutionError
from .grid_domain import (DomainSpec, Grid, GriddedFunction, boundary_distance,
                          check_margin, chi_mask)
from .kernels import d_coefficient, gamma_n, sphere_area
from .luxemburg import luxemburg_norm

__all__ = [
    "OperatorParams", "WeightField", "riesz_potential", "potential_far_field",
    "maximal", "hypersingular_truncated", "riesz_derivative", "RieszDerivativeResult",
    "inversion_error", "InversionResult", "a_omega", "weight_equivalence_check",
    "WeightCheck", "marchaud_decomposition_residual", "MarchaudResult",
    "a_eps_apply", "domination_check", "DominationResult", "lattice_tail_sum",
]

EPS_TOL = 1e-9


@dataclass(frozen=True)
class OperatorParams:
    alpha: float
    epsilons: tuple
    ell: int = 1
    d_coeff: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        eps = tuple(float(e) for e in self.epsilons)
        if any(b >= a for a, b in zip(eps, eps[1:])) or min(eps) <= 0:
            raise ValueError("epsilons must be positive and strictly decreasing")
        object.__setattr__(self, "epsilons", eps)

    def check_resolution(self, h: float) -> None:
        if min(self.epsilons) < 2 * h * (1 - EPS_TOL):
            raise ResolutionError(f"smallest eps {min(self.epsilons):.4g} is below 2h = {2 * h:.4g}")


# lattice kernels

def _offsets(shape):
    """Integer offset arrays covering -(m-1)..(m-1) per axis."""
    return np.meshgrid(*[np.arange(-(k - 1), k) for k in shape], indexing="ij")


def _offset_norm2(shape):
    return sum(j.astype(float) ** 2 for j in _offsets(shape))


@functools.lru_cache(maxsize=None)
def _self_cell_factor(n, alpha):
    """Diagonal weight (in units of h^alpha) of the corrected potential rule.

    With off-diagonal weights |j|^(alpha-n) the correct diagonal weight is
    minus the analytically continued lattice sum of |j|^(alpha-n) over
    nonzero j.  Using it makes the rule exact to O(h^2) on smooth densities,
    where the plain cell integral leaves an O(h^alpha) error.  In 1-D the
    sum is 2 zeta(1 - alpha); in 2-D it is computed as the limit of the
    partial sums over squares minus the integral over the same squares,
    Richardson-extrapolated in the known J^(alpha-2) rate.
    """
    if n == 1:
        return -2.0 * float(special.zeta(1 - alpha))
    if n == 2:
        ang = integrate.quad(lambda t: math.cos(t) ** -alpha, 0, math.pi / 4,
                             epsabs=0, epsrel=1e-13)[0]

        def partial(J):
            j = np.arange(-J, J + 1, dtype=float)
            r2 = j[:, None] ** 2 + j[None, :] ** 2
            r2[J, J] = np.inf
            s = math.fsum(np.sort(r2.ravel() ** ((alpha - 2) / 2)).tolist())
            return s - 8 / alpha * (J + 0.5) ** alpha * ang

        coarse, fine = partial(256), partial(512)
        regularized = fine + (fine - coarse) / (2 ** (2 - alpha) - 1)
        return -regularized
    raise NotImplementedError("the potential rule is implemented for n = 1, 2")


def _potential_weights(shape, h, alpha):
    """Cell weights |j h|^(alpha-n) h^n off the diagonal, corrected weight on it."""
    n = len(shape)
    r2 = _offset_norm2(shape)
    center = tuple(k - 1 for k in shape)
    r2[center] = 1.0
    w = (r2 * h * h) ** ((alpha - n) / 2) * h ** n
    w[center] = _self_cell_factor(n, alpha) * h ** alpha
    return w


def _lattice_conv(values, kernel):
    """sum_y values(y) kernel(x - y) with the kernel indexed by offsets -(m-1)..(m-1)."""
    full = fftconvolve(values, kernel, mode="full")
    sl = tuple(slice(k - 1, 2 * k - 1) for k in values.shape)
    return full[sl]


def _bounding_grid(a: Grid, b: Grid) -> Grid:
    h = a.spacing
    if not math.isclose(h, b.spacing, rel_tol=1e-12):
        raise ValueError("grids have different spacing")
    lo = np.minimum(a.lower, b.lower)
    hi = np.maximum(a.upper, b.upper)
    m = tuple(int(v) for v in np.rint((hi - lo) / h))
    out = Grid(tuple(lo), tuple(np.array(m) * h), m)
    a.index_offset(out)
    b.index_offset(out)
    return out


def riesz_potential(phi: GriddedFunction, alpha: float, grid: Grid | None = None,
                    method: str = "fft", normalize: bool = True) -> GriddedFunction:
    """Riesz potential of the zero extension of ``phi``, sampled on ``grid``.

    Parameters
    ----------
    phi : GriddedFunction
        Density; cells outside its mask count as zero.
    alpha : float
        Order, 0 < alpha < n.
    grid : Grid, optional
        Target grid with the same spacing, aligned with ``phi.grid``.
        Defaults to ``phi.grid``.
    method : {"fft", "direct"}
        FFT lattice convolution or the O(N^2) double sum.
    normalize : bool
        Divide by gamma_n(alpha).  Without it the result is the plain
        integral of phi(y) |x-y|^(alpha-n).
    """
    src = phi.grid
    n = src.dim
    if not 0 < alpha < n:
        raise ValueError(f"alpha must lie in (0, {n})")
    h = src.spacing
    tgt = src if grid is None else grid
    dens = np.where(phi.region(), phi.values, 0.0)
    scale = 1.0 / gamma_n(n, alpha) if normalize else 1.0
    if method == "fft":
        box = _bounding_grid(src, tgt)
        w = _potential_weights(box.shape, h, alpha)
        out = _lattice_conv(src.embed(dens, box), w)
        vals = tgt.crop(out, box)
    elif method == "direct":
        vals = _potential_direct(dens, src, tgt, alpha)
    else:
        raise ValueError(f"unknown method {method!r}")
    return GriddedFunction(tgt, vals * scale)


def _potential_direct(dens, src, tgt, alpha, chunk=2048):
    n = src.dim
    h = src.spacing
    ys = src.points()
    d = dens.ravel()
    keep = d != 0
    ys, d = ys[keep], d[keep]
    xs = tgt.points()
    self_w = _self_cell_factor(n, alpha) * h ** alpha
    out = np.empty(len(xs))
    for i in range(0, len(xs), chunk):
        diff = xs[i:i + chunk, None, :] - ys[None, :, :]
        r = np.linalg.norm(diff, axis=-1)
        on_diag = r < 0.5 * h
        w = np.where(on_diag, self_w, np.where(on_diag, 1.0, r) ** (alpha - n) * h ** n)
        out[i:i + chunk] = w @ d
    return out.reshape(tgt.shape)


def potential_far_field(phi: GriddedFunction, alpha: float, block: int | None = None,
                        chunk: int = 512) -> Callable:
    """Callable evaluating the normalized Riesz potential of ``phi`` at arbitrary points.

    Intended for points outside the window of ``phi``, where the kernel is
    smooth over the support.  Cells are merged into blocks of ``block`` cells
    per axis (default: at most 64 blocks per axis), each carrying its total
    mass at its mass-weighted center.
    """
    grid = phi.grid
    n = grid.dim
    vals = np.where(phi.region(), phi.values, 0.0) * grid.cell_volume
    if block is None:
        block = max(1, -(-max(grid.shape) // 64))
    pad = [(0, -k % block) for k in grid.shape]
    v = np.pad(vals, pad)
    coords = [np.pad(c, pad) for c in grid.mesh()]
    shp = []
    for k in v.shape:
        shp += [k // block, block]
    axes = tuple(range(1, 2 * n, 2))
    mass = v.reshape(shp).sum(axis=axes).ravel()
    weight = np.abs(v).reshape(shp).sum(axis=axes).ravel()
    centers = []
    for c in coords:
        wc = (np.abs(v) * c).reshape(shp).sum(axis=axes).ravel()
        centers.append(np.divide(wc, weight, out=np.zeros_like(wc), where=weight > 0))
    keep = weight > 0
    ys = np.stack(centers, -1)[keep]
    wts = mass[keep] / gamma_n(n, alpha)

    def evaluate(z):
        z = np.asarray(z, dtype=float).reshape(-1, n)
        out = np.empty(len(z))
        for i in range(0, len(z), chunk):
            r2 = np.sum((z[i:i + chunk, None, :] - ys[None, :, :]) ** 2, axis=-1)
            out[i:i + chunk] = r2 ** ((alpha - n) / 2) @ wts
        return out

    return evaluate


# maximal operator

def maximal(phi: GriddedFunction, domain=None) -> GriddedFunction:
    """Discrete maximal function over balls intersected with the domain.

    For each cell x in the domain, the largest average of |phi| over the
    domain cells y with |y - x| < r, for r on the ladder h, sqrt(2) h, 2h, ...
    up to the first rung at or above diam(domain).  The smallest ball holds
    only the cell itself, so the result dominates |phi|.
    """
    grid = phi.grid
    h = grid.spacing
    if domain is None:
        chi = phi.region()
        pts = grid.points()[chi.ravel()]
        diam = float(np.max(np.ptp(pts, axis=0))) * math.sqrt(grid.dim) + h
    elif isinstance(domain, DomainSpec):
        chi = chi_mask(domain, grid)
        diam = domain.diam()
    else:
        chi = np.asarray(domain, dtype=bool)
        pts = grid.points()[chi.ravel()]
        diam = float(np.linalg.norm(np.ptp(pts, axis=0))) + h
    a = np.where(chi, np.abs(phi.values), 0.0)
    chi_f = chi.astype(float)
    best = a.copy()
    k = 1
    while True:
        r = h * math.sqrt(2) ** k
        rc = r / h
        K = int(math.ceil(rc))
        ax = np.arange(-K, K + 1, dtype=float)
        r2 = sum(c ** 2 for c in np.meshgrid(*([ax] * grid.dim), indexing="ij"))
        ball = (r2 < rc * rc * (1 - 1e-12)).astype(float)
        sums = fftconvolve(a, ball, mode="same")
        counts = np.rint(fftconvolve(chi_f, ball, mode="same"))
        avg = np.where(counts > 0, np.maximum(sums, 0.0) / np.maximum(counts, 1.0), 0.0)
        best = np.maximum(best, avg)
        if r >= diam:
            break
        k += 1
    return GriddedFunction(grid, np.where(chi, best, 0.0), chi)


# truncated hypersingular integral

def _eps_cells2(eps, h):
    """Squared truncation radius in cell units, nudged so lattice points on the sphere are excluded."""
    return (eps / h) ** 2 * (1 + EPS_TOL)


def _trunc_kernel(shape, h, alpha, eps):
    n = len(shape)
    r2 = _offset_norm2(shape)
    out = np.zeros_like(r2)
    far = r2 > _eps_cells2(eps, h)
    out[far] = (r2[far] * h * h) ** (-(n + alpha) / 2) * h ** n
    return out


@functools.lru_cache(maxsize=None)
def lattice_tail_sum(n: int, alpha: float, rc2: float, box: int = 256) -> float:
    """sum of |j|^(-n-alpha) over nonzero integer vectors with |j|^2 > rc2.

    One dimension uses the Hurwitz zeta function.  In two dimensions the
    lattice sum is explicit inside the square |j|_inf <= J0 and the rest is
    replaced by the continuum integral over the complement of the square of
    half-width J0 + 1/2.
    """
    if n == 1:
        J = int(math.floor(math.sqrt(rc2)))
        return 2 * float(special.zeta(1 + alpha, J + 1))
    if n == 2:
        J0 = max(box, 4 * int(math.ceil(math.sqrt(rc2))))
        j = np.arange(-J0, J0 + 1, dtype=float)
        r2 = j[:, None] ** 2 + j[None, :] ** 2
        with np.errstate(divide="ignore"):
            v = np.where(r2 > rc2, r2 ** (-(2 + alpha) / 2), 0.0)
        ang = integrate.quad(lambda t: math.cos(t) ** alpha, 0, math.pi / 4, epsabs=0, epsrel=1e-13)[0]
        tail = 8 / alpha * (J0 + 0.5) ** -alpha * ang
        return math.fsum(np.sort(v.ravel()).tolist()) + tail
    raise NotImplementedError("lattice sums are implemented for n = 1, 2")


def _gauss(q):
    t, w = special.roots_legendre(q)
    return 0.5 * (t + 1), 0.5 * w


def _exterior_nodes(grid: Grid, nq: int = 24, nth: int = 16):
    """Quadrature nodes and weights for the complement of the window."""
    lo, hi = grid.lower, grid.upper
    c = 0.5 * (lo + hi)
    s, ws = _gauss(nq)
    if grid.dim == 1:
        zs = [c + (hi - c) / s[:, None], c + (lo - c) / s[:, None]]
        w = (hi[0] - c[0]) / s ** 2 * ws
        return np.concatenate(zs), np.concatenate([w, w])
    if grid.dim != 2:
        raise NotImplementedError("far-field quadrature is implemented for n = 1, 2")
    half = 0.5 * (hi - lo)
    corners = np.sort(np.array([math.atan2(sy * half[1], sx * half[0])
                                for sx in (1, -1) for sy in (1, -1)]))
    edges = np.concatenate([corners, [corners[0] + 2 * math.pi]])
    t, wt = _gauss(nth)
    th, thw = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        for lo_p, hi_p in ((a, 0.5 * (a + b)), (0.5 * (a + b), b)):
            th.append(lo_p + t * (hi_p - lo_p))
            thw.append(wt * (hi_p - lo_p))
    th, thw = np.concatenate(th), np.concatenate(thw)
    ct, st = np.cos(th), np.sin(th)
    with np.errstate(divide="ignore"):
        rb = np.minimum(np.where(ct != 0, half[0] / np.abs(ct), np.inf),
                        np.where(st != 0, half[1] / np.abs(st), np.inf))
    r = rb[:, None] / s[None, :]
    w = (rb[:, None] ** 2 / s[None, :] ** 3) * thw[:, None] * ws[None, :]
    z = np.stack([c[0] + (r * ct[:, None]).ravel(), c[1] + (r * st[:, None]).ravel()], -1)
    return z, w.ravel()


def far_field_correction(grid, alpha, far_field, where=None, chunk=1024):
    """Integral over the complement of the window of f(z) |x - z|^(-n-alpha).

    Evaluated at the cells selected by ``where`` (default all); zero elsewhere.
    The radial quadrature maps r = R/s onto Gauss-Legendre nodes in s, which
    is accurate for far fields decaying like a potential, |z|^(alpha-n), and
    for cells well inside the window.  A field that does not decay leaves an
    endpoint singularity in s and loses accuracy.
    """
    n = grid.dim
    z, w = _exterior_nodes(grid)
    fw = np.asarray(far_field(z), dtype=float) * w
    sel = np.ones(grid.shape, dtype=bool) if where is None else np.asarray(where, dtype=bool)
    xs = grid.points()[sel.ravel()]
    vals = np.empty(len(xs))
    for i in range(0, len(xs), chunk):
        r2 = np.sum((xs[i:i + chunk, None, :] - z[None, :, :]) ** 2, axis=-1)
        vals[i:i + chunk] = r2 ** (-(n + alpha) / 2) @ fw
    out = np.zeros(grid.shape)
    out[sel] = vals
    return out


def hypersingular_truncated(f: GriddedFunction, alpha: float, eps: float,
                            d_coeff: float | None = None,
                            far_field: Callable | None = None) -> GriddedFunction:
    """Truncated hypersingular integral D_eps f on the window grid.

    ``(1/d) * sum over |y| > eps of (f(x) - f(x - y)) |y|^(-n-alpha) h^n``,
    where the sum runs over the whole lattice.  Outside the window f is zero
    unless ``far_field`` (a callable on ``(k, n)`` point arrays) supplies it;
    that exterior part is then integrated as a continuum integral.

    Raises
    ------
    ResolutionError
        If ``eps < 2h``.
    """
    grid = f.grid
    n = grid.dim
    h = grid.spacing
    if eps < 2 * h * (1 - EPS_TOL):
        raise ResolutionError(f"eps = {eps:.4g} is below 2h = {2 * h:.4g}")
    d = d_coefficient(n, alpha) if d_coeff is None else d_coeff
    vals = f.values
    S = lattice_tail_sum(n, alpha, round(_eps_cells2(eps, h), 9)) * h ** -alpha
    conv = _lattice_conv(vals, _trunc_kernel(grid.shape, h, alpha, eps))
    out = vals * S - conv
    if far_field is not None:
        out = out - far_field_correction(grid, alpha, far_field)
    return GriddedFunction(grid, out / d, f.mask)


class RieszDerivativeResult(NamedTuple):
    limit: GriddedFunction
    table: list
    converged: bool


def riesz_derivative(f: GriddedFunction, alpha: float, eps_sequence, p=2.0,
                     d_coeff: float | None = None, far_field: Callable | None = None,
                     region=None) -> RieszDerivativeResult:
    """D_eps f along a decreasing ladder of truncation radii.

    The table lists, for each eps after the first, the L^p(.) distance
    between successive truncations.  ``converged`` is False when the last
    two distances fail to decrease.
    """
    eps = [float(e) for e in eps_sequence]
    if len(eps) < 2 or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_sequence must hold at least two strictly decreasing radii")
    outs = [hypersingular_truncated(f, alpha, e, d_coeff, far_field) for e in eps]
    table = [{"eps": eps[0], "distance": None}]
    dists = []
    for prev, cur, e in zip(outs, outs[1:], eps[1:]):
        diff = GriddedFunction(f.grid, cur.values - prev.values, f.mask)
        dist = luxemburg_norm(diff, p, region=region)
        dists.append(dist)
        table.append({"eps": e, "distance": dist})
    converged = len(dists) < 2 or dists[-1] < dists[-2]
    return RieszDerivativeResult(outs[-1], table, bool(converged))


class InversionResult(NamedTuple):
    error: float
    errors: list
    eps: list


def inversion_error(phi: GriddedFunction, alpha: float, p=2.0, eps_cells=(8, 4, 2),
                    pad: int | None = None, d_coeff: float | None = None) -> InversionResult:
    """Relative L^p(.) error of D_eps I^alpha phi against phi on phi's grid.

    The potential is computed on the grid padded by ``pad`` cells per side
    (default m/8) and continued beyond the padded window by direct
    evaluation, so the truncated integral sees the potential on all of R^n.
    """
    grid = phi.grid
    h = grid.spacing
    pad = max(grid.shape) // 8 if pad is None else pad
    big = grid.padded(pad)
    dens = np.where(phi.region(), phi.values, 0.0)
    rhs = luxemburg_norm(GriddedFunction(grid, dens), p)
    eps = [k * h for k in eps_cells]
    if rhs == 0:
        return InversionResult(0.0, [0.0] * len(eps), eps)
    src = GriddedFunction(big, grid.embed(dens, big))
    u = riesz_potential(src, alpha)
    far = potential_far_field(src, alpha)
    d = d_coefficient(grid.dim, alpha) if d_coeff is None else d_coeff
    far_corr = far_field_correction(big, alpha, far, where=grid.embed(np.ones(grid.shape), big) > 0)
    errors = []
    for e in eps:
        raw = hypersingular_truncated(u, alpha, e, d_coeff=1.0)
        approx = grid.crop((raw.values - far_corr) / d, big)
        errors.append(luxemburg_norm(GriddedFunction(grid, approx - dens), p) / rhs)
    return InversionResult(errors[-1], errors, eps)


# exterior weight

@dataclass
class WeightField:
    grid: Grid
    values: np.ndarray
    mask: np.ndarray
    far_field: np.ndarray

    def as_function(self) -> GriddedFunction:
        return GriddedFunction(self.grid, self.values, self.mask)


@functools.lru_cache(maxsize=None)
def _near_cell_integrals(n, alpha, reach=2):
    """Exact integrals of |y|^(-n-alpha) over unit cells at offsets 0 < |j|_inf <= reach."""
    out = {}
    rng = range(-reach, reach + 1)
    if n == 1:
        for j in rng:
            if j:
                a, b = abs(j) - 0.5, abs(j) + 0.5
                out[(j,)] = (a ** -alpha - b ** -alpha) / alpha
        return out
    if n == 2:
        for j in rng:
            for k in rng:
                if (j, k) == (0, 0) or (abs(j), abs(k)) in out:
                    continue
                val = integrate.dblquad(
                    lambda y, x: (x * x + y * y) ** (-(2 + alpha) / 2),
                    abs(j) - 0.5, abs(j) + 0.5, abs(k) - 0.5, abs(k) + 0.5,
                    epsabs=0, epsrel=1e-12)[0]
                out[(abs(j), abs(k))] = val
        return {(j, k): out[(abs(j), abs(k))] for j in rng for k in rng if (j, k) != (0, 0)}
    raise NotImplementedError("a_Omega is implemented for n = 1, 2")


def _exterior_window_integral(grid: Grid, alpha: float, pts: np.ndarray, nth: int = 32):
    """Exact integral of |x - y|^(-n-alpha) over R^n minus the window, per point."""
    lo, hi = grid.lower, grid.upper
    if grid.dim == 1:
        x = pts[:, 0]
        return ((x - lo[0]) ** -alpha + (hi[0] - x) ** -alpha) / alpha
    t, wt = _gauss(nth)
    out = np.empty(len(pts))
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    for i, x in enumerate(pts):
        ang = np.sort(np.arctan2(corners[:, 1] - x[1], corners[:, 0] - x[0]))
        edges = np.concatenate([ang, [ang[0] + 2 * math.pi]])
        th = (edges[:-1, None] + t[None, :] * np.diff(edges)[:, None]).ravel()
        w = (wt[None, :] * np.diff(edges)[:, None]).ravel()
        ct, st = np.cos(th), np.sin(th)
        with np.errstate(divide="ignore"):
            tx = np.where(ct > 0, (hi[0] - x[0]) / ct, np.where(ct < 0, (lo[0] - x[0]) / ct, np.inf))
            ty = np.where(st > 0, (hi[1] - x[1]) / st, np.where(st < 0, (lo[1] - x[1]) / st, np.inf))
        R = np.minimum(tx, ty)
        out[i] = w @ R ** -alpha / alpha
    return out


def a_omega(domain: DomainSpec, alpha: float, grid: Grid) -> WeightField:
    """a_Omega(x): integral of |x - y|^(-n-alpha) over the complement of the domain.

    The part of the complement inside the window is summed over exterior
    cells, with exact cell integrals for the cells within two cells of x;
    the rest of R^n is integrated exactly in closed form (1-D) or by
    Gauss-Legendre quadrature in the angle with exact radial integration (2-D).

    Raises
    ------
    ContainmentError
        If the window does not leave a margin of diam/4 around the domain.
    """
    check_margin(domain, grid)
    n = grid.dim
    h = grid.spacing
    chi = chi_mask(domain, grid)
    ext = (~chi).astype(float)
    kern = _trunc_kernel(grid.shape, h, alpha, 0.0)
    center = tuple(k - 1 for k in grid.shape)
    for j, val in _near_cell_integrals(n, alpha).items():
        idx = tuple(c + o for c, o in zip(center, j))
        kern[idx] = val * h ** -alpha
    near = _lattice_conv(ext, kern)
    far = np.zeros(grid.shape)
    far[chi] = _exterior_window_integral(grid, alpha, grid.points()[chi.ravel()])
    vals = np.where(chi, near + far, 0.0)
    return WeightField(grid, vals, chi, far)


class WeightCheck(NamedTuple):
    c1: float
    c1_ratio: float
    c1_holds: bool
    c2_est: float
    cone_declared: bool


def weight_equivalence_check(domain: DomainSpec, alpha: float, grid: Grid,
                             slack: float = 0.02, band: float | None = None,
                             weight: WeightField | None = None) -> WeightCheck:
    """Compare a_Omega with delta^(-alpha).

    ``c1_ratio`` is the largest a_Omega delta^alpha / c1 over all domain
    cells, with c1 = |S^(n-1)| / alpha; the upper bound holds when it is at
    most 1 + slack.  ``c2_est`` is the largest delta^(-alpha) / a_Omega over
    cells at distance at least ``band`` (default h sqrt(n)) from the
    boundary; closer cells see the staircase rather than the true boundary.
    """
    a = weight if weight is not None else a_omega(domain, alpha, grid)
    dist = boundary_distance(domain, grid).values
    chi = a.mask
    c1 = sphere_area(grid.dim) / alpha
    ratio = float(np.max(a.values[chi] * dist[chi] ** alpha / c1))
    band = grid.spacing * math.sqrt(grid.dim) if band is None else band
    core = chi & (dist >= band)
    c2 = float(np.max(dist[core] ** -alpha / a.values[core])) if core.any() else float("nan")
    return WeightCheck(c1, ratio, bool(ratio <= 1 + slack), c2, domain.exterior_cone)


# decomposition and A_eps

class MarchaudResult(NamedTuple):
    residual: float
    scale: float
    relative: float


def marchaud_decomposition_residual(phi: GriddedFunction, domain: DomainSpec, alpha: float,
                                    eps: float | None = None, band_cells: float = 4.0,
                                    weight: WeightField | None = None) -> MarchaudResult:
    """Residual of  a_Omega f - d D_eps(E f) + int_Omega (f(x) - f(y)) K  with f = I^alpha E phi.

    All three terms use the same lattice and the same truncation radius
    (default 2h).  The maximum runs over domain cells at distance at least
    ``max(band_cells h, eps)`` from the boundary; ``scale`` is the largest
    |a_Omega f| over the same cells.
    """
    grid = phi.grid
    h = grid.spacing
    eps = 2 * h if eps is None else eps
    chi = chi_mask(domain, grid)
    dens = np.where(chi, phi.values, 0.0)
    f = riesz_potential(GriddedFunction(grid, dens), alpha).values
    a = a_omega(domain, alpha, grid) if weight is None else weight
    fo = np.where(chi, f, 0.0)
    raw_ext = hypersingular_truncated(GriddedFunction(grid, fo), alpha, eps, d_coeff=1.0).values
    kern = _trunc_kernel(grid.shape, h, alpha, eps)
    inner = f * _lattice_conv(chi.astype(float), kern) - _lattice_conv(fo, kern)
    res = a.values * f - raw_ext + inner
    dist = boundary_distance(domain, grid).values
    core = chi & (dist >= max(band_cells * h, eps))
    if not core.any():
        raise ValueError("no cells lie outside the boundary band")
    r = float(np.max(np.abs(res[core])))
    s = float(np.max(np.abs(a.values[core] * f[core])))
    return MarchaudResult(r, s, r / s if s > 0 else 0.0)


def a_eps_apply(phi: GriddedFunction, domain: DomainSpec, alpha: float, eps: float,
                method: str = "fft") -> GriddedFunction:
    """A_eps phi(x): integral over y in the domain, |x - y| > eps, of
    (u(x) - u(y)) |x - y|^(-n-alpha), with u = I^alpha of the zero extension."""
    grid = phi.grid
    h = grid.spacing
    if eps < 2 * h * (1 - EPS_TOL):
        raise ResolutionError(f"eps = {eps:.4g} is below 2h = {2 * h:.4g}")
    chi = chi_mask(domain, grid)
    dens = np.where(chi, phi.values, 0.0)
    u = riesz_potential(GriddedFunction(grid, dens), alpha).values
    if method == "fft":
        kern = _trunc_kernel(grid.shape, h, alpha, eps)
        out = u * _lattice_conv(chi.astype(float), kern) - _lattice_conv(np.where(chi, u, 0.0), kern)
    elif method == "direct":
        pts = grid.points()[chi.ravel()]
        uc = u[chi]
        vals = np.empty(len(pts))
        n = grid.dim
        for i, x in enumerate(pts):
            r = np.linalg.norm(pts - x, axis=-1)
            far = r * r > _eps_cells2(eps, h) * h * h
            vals[i] = np.sum((uc[i] - uc[far]) * r[far] ** (-n - alpha)) * h ** n
        out = np.zeros(grid.shape)
        out[chi] = vals
    else:
        raise ValueError(f"unknown method {method!r}")
    return GriddedFunction(grid, np.where(chi, out, 0.0), chi)


class DominationResult(NamedTuple):
    C_est: float
    C_extended: float
    uniform: bool


def domination_check(domain: DomainSpec, alpha: float, test_set, eps_set,
                     tol: float = 0.10) -> DominationResult:
    """Largest |A_eps phi| / M phi over test functions, radii and cells.

    ``eps_set`` is extended one rung down (eps_min / 2, not below 2h) and the
    estimate is uniform when the extension changes it by at most ``tol``.
    """
    eps = sorted((float(e) for e in eps_set), reverse=True)
    grid = test_set[0].grid
    extra = max(eps[-1] / 2, 2 * grid.spacing)
    if extra >= eps[-1]:
        raise ResolutionError("cannot extend the eps ladder below 2h")
    best = {}
    for phi in test_set:
        M = maximal(GriddedFunction(grid, phi.values, chi_mask(domain, grid)), domain).values
        live = M > 0
        for e in eps + [extra]:
            A = a_eps_apply(phi, domain, alpha, e).values
            best[e] = max(best.get(e, 0.0), float(np.max(np.abs(A[live]) / M[live])))
    C = max(best[e] for e in eps)
    C_ext = max(C, best[extra])
    return DominationResult(C, C_ext, bool(abs(C_ext - C) <= tol * C))
