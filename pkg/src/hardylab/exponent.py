"""Variable exponents p(x) sampled on a grid.

Only the cells in the field's region (its mask, or the whole window) carry
meaningful values.  Cells outside the mask hold the value of the nearest
in-mask cell so that every field is finite and in range on the whole window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import ndimage

from ._rng import stream
from .grid_domain import DomainSpec, Grid, chi_mask

__all__ = [
    "ExponentField", "ClassPResult", "LogConditionResult",
    "class_P_check", "log_condition_check", "conjugate",
    "sobolev_exponent", "regular_extension",
]

DEFAULT_PAIR_BUDGET = 100_000
MIN_PAIR_BUDGET = 10_000


def _nearest_fill(values, mask):
    """Copy into every cell outside ``mask`` the value of its nearest in-mask cell."""
    if mask.all():
        return values
    if not mask.any():
        raise ValueError("exponent mask is empty")
    idx = ndimage.distance_transform_edt(~mask, return_distances=False, return_indices=True)
    return values[tuple(idx)]


class ExponentField:
    """Exponent p(x) sampled at cell centers.

    Parameters
    ----------
    grid : Grid
    values : array_like
        One value per cell, finite.
    mask : array_like of bool, optional
        Region where p is defined (usually the domain).  Defaults to the window.
    func : callable, optional
        The continuum exponent, ``func(points) -> values`` for ``(k, n)``
        point arrays.  Used by the projection mode of :func:`regular_extension`.
    """

    def __init__(self, grid: Grid, values, mask=None, func: Callable | None = None):
        v = np.asarray(values, dtype=float)
        if v.size == 1:
            v = np.full(grid.shape, float(v))
        v = v.reshape(grid.shape)
        if mask is not None:
            mask = np.asarray(mask, dtype=bool).reshape(grid.shape)
            if mask.all():
                mask = None
        if not np.all(np.isfinite(v if mask is None else v[mask])):
            raise ValueError("exponent values must be finite")
        if mask is not None:
            v = _nearest_fill(v, mask)
        self.grid = grid
        self.values = v
        self.mask = mask
        self.func = func
        self.log_inflation = None
        self._log_cache = {}

    @classmethod
    def constant(cls, grid, value, mask=None):
        value = float(value)
        return cls(grid, np.full(grid.shape, value), mask,
                   func=lambda x: np.full(len(x), value))

    @classmethod
    def from_function(cls, grid, func, mask=None):
        vals = np.asarray(func(grid.points()), dtype=float)
        return cls(grid, vals, mask, func=func)

    @classmethod
    def affine(cls, grid, gradient, offset, mask=None):
        g = np.atleast_1d(np.asarray(gradient, dtype=float))
        if g.size != grid.dim:
            raise ValueError(f"gradient needs {grid.dim} entries")
        return cls.from_function(grid, lambda x: x @ g + float(offset), mask)

    def region(self) -> np.ndarray:
        return np.ones(self.grid.shape, dtype=bool) if self.mask is None else self.mask

    def restricted_to(self, mask) -> "ExponentField":
        """Same samples, region replaced by ``mask``."""
        return ExponentField(self.grid, self.values, mask, self.func)

    @property
    def p_minus(self) -> float:
        return float(self.values[self.region()].min())

    @property
    def p_plus(self) -> float:
        return float(self.values[self.region()].max())

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    def log_modulus(self, pair_budget=DEFAULT_PAIR_BUDGET, seed=42) -> float:
        key = (pair_budget, seed)
        if key not in self._log_cache:
            self._log_cache[key] = log_condition_check(self, pair_budget, seed).C_est
        return self._log_cache[key]

    def __repr__(self):
        return (f"ExponentField(grid={self.grid.m}, p_minus={self.p_minus:.6g}, "
                f"p_plus={self.p_plus:.6g})")


class ClassPResult(NamedTuple):
    p_minus: float
    p_plus: float
    in_class: bool


class LogConditionResult(NamedTuple):
    C_est: float
    satisfied: bool
    pairs: int


def class_P_check(p: ExponentField) -> ClassPResult:
    """Range of p over its region and whether ``1 < p_minus <= p_plus < inf``."""
    lo, hi = p.p_minus, p.p_plus
    return ClassPResult(lo, hi, bool(lo > 1 and np.isfinite(hi)))


def _pair_values(p, ia, ib):
    pts_a = np.stack([ax[i] for ax, i in zip(p.grid.axes(), ia)], axis=-1)
    pts_b = np.stack([ax[i] for ax, i in zip(p.grid.axes(), ib)], axis=-1)
    dist = np.linalg.norm(pts_a - pts_b, axis=-1)
    dp = np.abs(p.values[tuple(ia)] - p.values[tuple(ib)])
    return dist, dp


def log_condition_check(p: ExponentField, pair_budget: int = DEFAULT_PAIR_BUDGET,
                        seed: int = 42) -> LogConditionResult:
    """Sampled estimate of the smallest C with |p(x)-p(y)| <= C / (-ln|x-y|).

    Pairs with ``0 < |x-y| <= 1/2`` inside the region are taken from two
    sources: every cell paired with its neighbours at offsets of 2^j cells
    along each axis (multi-scale, deterministic), and ``pair_budget`` random
    pairs whose separations are log-uniform between one cell and 1/2.
    """
    if pair_budget < MIN_PAIR_BUDGET:
        raise ValueError(f"pair_budget must be at least {MIN_PAIR_BUDGET}")
    grid = p.grid
    region = p.region()
    shape = np.array(grid.shape)
    h = np.array(grid.h)
    best = 0.0
    count = 0

    # multi-scale axis offsets
    for axis in range(grid.dim):
        step = 1
        while step < shape[axis] and step * h[axis] <= 0.5:
            a = [slice(None)] * grid.dim
            b = [slice(None)] * grid.dim
            a[axis] = slice(0, shape[axis] - step)
            b[axis] = slice(step, None)
            a, b = tuple(a), tuple(b)
            both = region[a] & region[b]
            if both.any():
                dp = np.abs(p.values[a] - p.values[b])[both]
                best = max(best, float(dp.max()) * -np.log(step * h[axis]))
                count += int(both.sum())
            step *= 2

    # random pairs
    rng = stream(seed, "log_condition")
    cells = np.argwhere(region)
    hmin = float(h.min())
    if hmin < 0.5 and len(cells) > 1:
        i = cells[rng.integers(0, len(cells), pair_budget)]
        r = np.exp(rng.uniform(np.log(hmin), np.log(0.5), pair_budget))
        u = rng.normal(size=(pair_budget, grid.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        j = i + np.rint(r[:, None] * u / h).astype(int)
        ok = np.all((j >= 0) & (j < shape), axis=1)
        i, j = i[ok], j[ok]
        ok = region[tuple(j.T)]
        i, j = i[ok], j[ok]
        dist, dp = _pair_values(p, i.T, j.T)
        ok = (dist > 0) & (dist <= 0.5)
        if ok.any():
            best = max(best, float(np.max(dp[ok] * -np.log(dist[ok]))))
            count += int(ok.sum())
    return LogConditionResult(best, bool(np.isfinite(best)), count)


def conjugate(p: ExponentField) -> ExponentField:
    """Pointwise conjugate exponent p/(p-1)."""
    if np.any(p.values[p.region()] <= 1):
        raise ValueError("conjugate exponent needs p(x) > 1 everywhere")
    func = None
    if p.func is not None:
        f0 = p.func
        func = lambda x: (lambda v: v / (v - 1))(np.asarray(f0(x), dtype=float))
    return ExponentField(p.grid, p.values / (p.values - 1), p.mask, func)


def sobolev_exponent(p: ExponentField, alpha: float, n: int | None = None) -> ExponentField:
    """Exponent q with 1/q = 1/p - alpha/n."""
    n = p.grid.dim if n is None else n
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha > 0 and p.p_plus >= n / alpha:
        raise ValueError(f"sobolev exponent needs p_plus < n/alpha = {n / alpha:.6g}, "
                         f"got p_plus = {p.p_plus:.6g}")
    q = 1.0 / (1.0 / p.values - alpha / n)
    func = None
    if p.func is not None:
        f0 = p.func
        func = lambda x: 1.0 / (1.0 / np.asarray(f0(x), dtype=float) - alpha / n)
    return ExponentField(p.grid, q, p.mask, func)


def regular_extension(p: ExponentField, domain: DomainSpec | None = None,
                      mode: str = "nearest", pair_budget: int = DEFAULT_PAIR_BUDGET,
                      seed: int = 42) -> ExponentField:
    """Extend p from its region to the whole window.

    Parameters
    ----------
    p : ExponentField
        Exponent on a window grid, masked to the domain.
    domain : DomainSpec, optional
        Needed for ``mode="projection"``; when given without a mask on ``p``
        the domain's cells define the region.
    mode : {"nearest", "projection"}
        ``"nearest"`` copies the value of the nearest in-region cell center,
        which keeps ``p_minus`` and ``p_plus`` of the samples exactly.
        ``"projection"`` evaluates the continuum exponent at the nearest point
        of the closed domain; it needs ``p.func`` and a shape with a closed
        form projection.

    Returns
    -------
    ExponentField
        Unmasked field equal to p on the region.  Its ``log_inflation``
        attribute is the ratio of the window log modulus to the region one.
    """
    if domain is not None and p.mask is None:
        p = p.restricted_to(chi_mask(domain, p.grid))
    region = p.region()
    if mode == "nearest":
        values = p.values.copy()
    elif mode == "projection":
        proj = None if domain is None else domain.shape.project(p.grid.points())
        if p.func is None or proj is None:
            raise ValueError("projection mode needs a continuum exponent and a projectable shape")
        values = np.asarray(p.func(proj), dtype=float).reshape(p.grid.shape)
        values[region] = p.values[region]
    else:
        raise ValueError(f"unknown extension mode {mode!r}")
    out = ExponentField(p.grid, values, None, None)
    if p.func is not None and mode == "projection":
        f0, shp = p.func, domain.shape
        out.func = lambda x: np.asarray(f0(shp.project(x)), dtype=float)
    c_in = p.log_modulus(pair_budget, seed)
    c_out = out.log_modulus(pair_budget, seed)
    out.log_inflation = 1.0 if c_out == c_in else (np.inf if c_in == 0 else c_out / c_in)
    return out
