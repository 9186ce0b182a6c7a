"""Modular and Luxemburg norm of variable-exponent Lebesgue spaces."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .exponent import ExponentField
from .grid_domain import GriddedFunction, _region_mask

__all__ = ["modular", "luxemburg_norm", "luxemburg_bracket", "modular_norm_bracket",
           "BracketResult"]

MAX_ITER = 200


def _prepare(f: GriddedFunction, p, region):
    if region is None and f.mask is None and isinstance(p, ExponentField):
        region = p.mask
    mask = _region_mask(f, region)
    a = np.abs(f.values[mask])
    if isinstance(p, ExponentField):
        if p.grid.shape != f.grid.shape:
            raise ValueError("function and exponent live on different grids")
        e = p.values[mask]
    else:
        e = np.full(a.shape, float(p))
    if not np.all(np.isfinite(a)):
        raise ValueError("function values must be finite")
    return a, e, f.grid.cell_volume


def _modular(a, e, vol, lam=1.0):
    nz = a > 0
    terms = np.exp(e[nz] * (np.log(a[nz]) - math.log(lam)))
    return math.fsum(terms.tolist()) * vol


def modular(f: GriddedFunction, p, region=None) -> float:
    """Midpoint quadrature of |f(x)|^p(x).

    ``p`` is an :class:`ExponentField` on the same grid or a constant.  The
    region defaults to the function's mask, then the exponent's mask, then
    the whole window.
    """
    a, e, vol = _prepare(f, p, region)
    return _modular(a, e, vol)


def luxemburg_bracket(f: GriddedFunction, p, rel_tol: float = 1e-10, region=None) -> tuple:
    """Interval ``(lo, hi)`` with modular(f/lo) > 1 >= modular(f/hi), hi/lo - 1 <= rel_tol.

    Returns ``(0.0, 0.0)`` for the zero function.
    """
    if not 0 < rel_tol <= 1e-3:
        raise ValueError("rel_tol must lie in (0, 1e-3]")
    a, e, vol = _prepare(f, p, region)
    if not np.any(a > 0):
        return 0.0, 0.0
    rho = lambda lam: _modular(a, e, vol, lam)
    lam = float(a.max())
    step = 2.0 if rho(lam) > 1 else 0.5
    for _ in range(MAX_ITER):
        nxt = lam * step
        if (rho(nxt) > 1) != (step > 1):
            lo, hi = (lam, nxt) if step > 1 else (nxt, lam)
            break
        lam = nxt
    else:
        raise RuntimeError("could not bracket the Luxemburg norm")
    for _ in range(MAX_ITER):
        if hi / lo - 1 <= rel_tol:
            break
        mid = math.sqrt(lo * hi)
        if rho(mid) > 1:
            lo = mid
        else:
            hi = mid
    return lo, hi


def luxemburg_norm(f: GriddedFunction, p, rel_tol: float = 1e-10, region=None) -> float:
    """inf{lam > 0 : modular(f/lam) <= 1}, by bisection in log(lam).

    The modular is strictly decreasing in lam wherever it is positive, so
    bisection always converges.  The geometric midpoint of the final bracket
    is returned.
    """
    lo, hi = luxemburg_bracket(f, p, rel_tol, region)
    return math.sqrt(lo * hi)


class BracketResult(NamedTuple):
    lower: float
    upper: float
    holds: bool
    modular: float
    norm: float
    sigma: float
    theta: float


def modular_norm_bracket(f: GriddedFunction, p: ExponentField, region=None,
                         slack: float = 1e-12, rel_tol: float = 1e-10) -> BracketResult:
    """Check ``||f||^sigma <= modular(f) <= ||f||^theta``.

    For ``||f|| >= 1`` the exponents are ``(p_minus, p_plus)``, otherwise
    ``(p_plus, p_minus)``.  Both cases agree with ``min/max(lam^p_minus,
    lam^p_plus)``, which is monotone in lam, so evaluating the lower bound at
    the bracket's ``lo`` and the upper bound at its ``hi`` accounts for the
    root-finding error rigorously.  ``slack`` is relative to max(1, modular).
    """
    if isinstance(p, ExponentField):
        sub = p.restricted_to(_region_mask(f, region if region is not None else
                                           (f.mask if f.mask is not None else p.mask)))
        pm, pp = sub.p_minus, sub.p_plus
    else:
        pm = pp = float(p)
    rho = modular(f, p, region)
    lo, hi = luxemburg_bracket(f, p, rel_tol, region)
    norm = math.sqrt(lo * hi)
    lower = min(lo ** pm, lo ** pp)
    upper = max(hi ** pm, hi ** pp)
    tol = slack * max(1.0, rho)
    holds = lower - tol <= rho <= upper + tol
    sigma, theta = (pm, pp) if norm >= 1 else (pp, pm)
    return BracketResult(lower, upper, bool(holds), rho, norm, sigma, theta)
