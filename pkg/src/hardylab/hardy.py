"""Hardy ratios for the potential operator, constant estimation and the
multiplier test.

Test functions are built from atoms defined in continuum coordinates (centers
and radii in physical units), so the same family can be sampled on grids of
different resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from ._rng import stream
from .exponent import ExponentField
from .grid_domain import (DomainSpec, Grid, GriddedFunction, boundary_distance,
                          chi_mask, strichartz_count)
from .luxemburg import luxemburg_norm
from .operators import a_omega, hypersingular_truncated, riesz_potential

__all__ = [
    "Atom", "Member", "TestFamily", "HardyReport", "alpha_admissible", "hardy_ratio",
    "HardyRatio", "HardyProblem", "estimate_hardy_constant", "seed_stability",
    "multiplier_property_test", "MultiplierReport", "co_movement",
    "strichartz_corollary_check", "resample",
]

KINDS = ("bump", "slab", "spike")
REFERENCE_CELLS = {1: 4096, 2: 256}


def alpha_admissible(p, n: int, alpha: float) -> bool:
    """True iff 0 < alpha < min(1, n / p_plus)."""
    p_plus = p.p_plus if isinstance(p, ExponentField) else float(p)
    return bool(0 < alpha < min(1.0, n / p_plus))


def resample(p, grid: Grid):
    """The same continuum exponent sampled on another grid."""
    if not isinstance(p, ExponentField):
        return p
    if p.grid == grid:
        return p
    if p.func is None:
        raise ValueError("resampling needs an exponent with a continuum definition")
    return ExponentField.from_function(grid, p.func)


@dataclass(frozen=True)
class Atom:
    """One localized profile.

    ``bump``: smooth compactly supported exp(1 - 1/(1 - s^2)), s = |x-c|/r.
    ``spike``: (1 - s)^2 for s < 1, placed near the boundary.
    ``slab``: indicator of |x_axis - c_axis| < r.
    """

    kind: str
    center: tuple
    radius: float
    amplitude: float = 1.0
    axis: int = 0

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center)
        if self.kind == "slab":
            return self.amplitude * (np.abs(pts[:, self.axis] - c[self.axis]) < self.radius)
        s = np.linalg.norm(pts - c, axis=-1) / self.radius
        inside = s < 1
        out = np.zeros(len(pts))
        if self.kind == "bump":
            out[inside] = np.exp(1 - 1 / (1 - s[inside] ** 2))
        elif self.kind == "spike":
            out[inside] = (1 - s[inside]) ** 2
        else:
            raise ValueError(f"unknown atom kind {self.kind!r}")
        return self.amplitude * out

    def describe(self) -> dict:
        return {"kind": self.kind, "center": [float(v) for v in self.center],
                "radius": float(self.radius), "amplitude": float(self.amplitude),
                "axis": int(self.axis)}


@dataclass(frozen=True)
class Member:
    member_id: str
    kind: str
    atoms: tuple

    def sample(self, grid: Grid, chi: np.ndarray) -> GriddedFunction:
        pts = grid.points()
        vals = sum(a.evaluate(pts) for a in self.atoms).reshape(grid.shape)
        return GriddedFunction(grid, np.where(chi, vals, 0.0), chi)

    def describe(self) -> dict:
        return {"member_id": self.member_id, "kind": self.kind,
                "atoms": [a.describe() for a in self.atoms]}


class _Geometry:
    """Grid-independent boundary queries on a fixed reference grid."""

    def __init__(self, domain: DomainSpec):
        self.domain = domain
        lo, hi = domain.bounds()
        pad = 0.1 * (hi - lo)
        m = REFERENCE_CELLS.get(domain.dim, 64)
        self.grid = Grid.from_bounds(lo - pad, hi + pad, m)
        chi = chi_mask(domain, self.grid)
        dist, idx = ndimage.distance_transform_edt(chi, sampling=self.grid.h,
                                                   return_indices=True)
        self.chi = chi
        self.dist = dist
        self.nearest = idx
        self.diam = domain.diam()

    def _cell(self, x):
        i = np.floor((np.asarray(x) - self.grid.lower) / np.array(self.grid.h)).astype(int)
        return tuple(np.clip(i, 0, np.array(self.grid.shape) - 1))

    def distance(self, x) -> float:
        exact = self.domain.shape.distance(np.atleast_2d(x))
        if exact is not None:
            return float(exact[0])
        return float(self.dist[self._cell(x)])

    def exterior_point(self, x) -> np.ndarray:
        """Center of the nearest reference cell outside the domain."""
        idx = tuple(ax[self.nearest[(k,) + self._cell(x)]]
                    for k, ax in enumerate(self.grid.axes()))
        return np.array(idx)

    def random_point(self, rng, max_dist=None) -> np.ndarray:
        lo, hi = self.domain.bounds()
        for _ in range(100_000):
            x = rng.uniform(lo, hi)
            if self.domain.contains(x[None, :])[0]:
                if max_dist is None or self.distance(x) < max_dist:
                    return x
        raise RuntimeError("could not sample a point in the domain")


@dataclass(frozen=True)
class TestFamily:
    """Seeded family of probe functions.

    ``kind`` is one of "bump", "slab", "spike", "mixture" or "mixed" (cycles
    through the four).  Radii are drawn between diam/20 and diam/4.
    """

    __test__ = False  # not a pytest class

    kind: str = "mixed"
    count: int = 12
    seed: int = 42

    def members(self, domain: DomainSpec) -> list:
        geo = _Geometry(domain)
        rng = stream(self.seed, "family", self.kind)
        kinds = (KINDS + ("mixture",)) if self.kind == "mixed" else (self.kind,)
        out = []
        for i in range(self.count):
            kind = kinds[i % len(kinds)]
            if kind == "mixture":
                atoms = tuple(_random_atom(geo, rng, KINDS[int(rng.integers(3))],
                                           float(rng.uniform(0.2, 1.0))) for _ in range(3))
            elif kind in KINDS:
                atoms = (_random_atom(geo, rng, kind, 1.0),)
            else:
                raise ValueError(f"unknown family kind {kind!r}")
            out.append(Member(f"{kind}-{i}", kind, atoms))
        return out


def _random_atom(geo, rng, kind, amplitude):
    d = geo.diam
    r = float(rng.uniform(d / 20, d / 4))
    if kind == "spike":
        r = float(rng.uniform(d / 20, d / 10))
        c = geo.random_point(rng, max_dist=r)
    else:
        c = geo.random_point(rng)
    axis = int(rng.integers(geo.domain.dim))
    return Atom(kind, tuple(float(v) for v in c), r, amplitude, axis)


class HardyRatio(NamedTuple):
    lhs: float
    rhs: float
    ratio: float


class HardyProblem:
    """Precomputed weight and masks for repeated Hardy ratios on one grid."""

    def __init__(self, domain: DomainSpec, p, alpha: float, grid: Grid,
                 weight: str = "a_omega", check_admissible: bool = True):
        if weight not in ("delta", "a_omega"):
            raise ValueError("weight must be 'delta' or 'a_omega'")
        self.domain, self.alpha, self.grid, self.weight = domain, alpha, grid, weight
        self.p = resample(p, grid)
        if check_admissible and not alpha_admissible(self.p, grid.dim, alpha):
            raise ValueError("alpha must be < min(1, n/p_plus)")
        self.chi = chi_mask(domain, grid)
        if weight == "delta":
            dist = boundary_distance(domain, grid).values
            self.w = np.where(self.chi, np.where(self.chi, dist, 1.0) ** -alpha, 0.0)
        else:
            self.w = a_omega(domain, alpha, grid).values

    def ratio(self, phi: GriddedFunction) -> HardyRatio:
        dens = np.where(self.chi, phi.values, 0.0)
        rhs = luxemburg_norm(GriddedFunction(self.grid, dens, self.chi), self.p)
        if rhs == 0:
            raise ValueError("the test function vanishes on the domain")
        U = riesz_potential(GriddedFunction(self.grid, dens), self.alpha, normalize=False).values
        lhs = luxemburg_norm(GriddedFunction(self.grid, self.w * U, self.chi), self.p)
        return HardyRatio(lhs, rhs, lhs / rhs)


def hardy_ratio(phi: GriddedFunction, domain: DomainSpec, p, alpha: float,
                weight: str = "a_omega", check_admissible: bool = True) -> HardyRatio:
    """||w(x) * int_Omega phi(y) |x-y|^(alpha-n) dy||_p / ||phi||_p on the domain.

    ``w`` is delta^(-alpha) for ``weight="delta"`` and a_Omega for
    ``weight="a_omega"``.  Raises ValueError when alpha is not admissible
    (unless ``check_admissible`` is False) or when phi vanishes on the domain.
    """
    prob = HardyProblem(domain, p, alpha, phi.grid, weight, check_admissible)
    return prob.ratio(phi)


@dataclass
class HardyReport:
    members: list
    C_est: float
    argmax: dict
    greedy: list
    parameters: dict
    notes: list = field(default_factory=list)

    def table(self) -> list:
        return [[m["member_id"], m["kind"], m["lhs"], m["rhs"], m["ratio"]] for m in self.members]

    def to_dict(self) -> dict:
        return {"C_est": self.C_est, "argmax": self.argmax, "greedy": self.greedy,
                "parameters": self.parameters, "notes": self.notes, "members": self.members}


def _perturb(member: Member, geo: _Geometry, step: float) -> Member:
    """Move every atom toward the boundary and sharpen it."""
    floor = geo.diam / 40
    atoms = []
    for a in member.atoms:
        c = np.asarray(a.center)
        target = geo.exterior_point(c)
        t = step
        new_c = c
        while t > 1e-3:
            cand = c + t * (target - c)
            if geo.domain.contains(cand[None, :])[0]:
                new_c = cand
                break
            t /= 2
        atoms.append(replace(a, center=tuple(float(v) for v in new_c),
                             radius=max(floor, 0.8 * a.radius)))
    return Member(member.member_id + "+", member.kind, tuple(atoms))


def estimate_hardy_constant(domain: DomainSpec, p, alpha: float, grid: Grid,
                            family: TestFamily | None = None, weight: str = "a_omega",
                            rounds: int = 10, check_admissible: bool = True,
                            extra_members=()) -> HardyReport:
    """Largest Hardy ratio over a family, pushed up by greedy refinement.

    The worst member is moved toward the boundary (half way to the nearest
    exterior point) and sharpened (radius times 0.8, not below diam/40) for
    ``rounds`` rounds; a move is kept only if it raises the ratio, otherwise
    the step is halved.  The result is a lower estimate of the constant.
    """
    family = family or TestFamily()
    prob = HardyProblem(domain, p, alpha, grid, weight, check_admissible)
    members = list(family.members(domain)) + list(extra_members)
    rows = []
    for mem in members:
        r = prob.ratio(mem.sample(grid, prob.chi))
        rows.append({"member_id": mem.member_id, "kind": mem.kind,
                     "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio})
    best_i = int(np.argmax([row["ratio"] for row in rows]))
    best, best_ratio = members[best_i], rows[best_i]["ratio"]
    geo = _Geometry(domain)
    greedy = [best_ratio]
    step = 0.5
    for _ in range(rounds):
        cand = _perturb(best, geo, step)
        phi = cand.sample(grid, prob.chi)
        if not np.any(phi.values):
            step /= 2
            greedy.append(best_ratio)
            continue
        r = prob.ratio(phi)
        if r.ratio > best_ratio:
            best, best_ratio = cand, r.ratio
            rows.append({"member_id": cand.member_id, "kind": cand.kind,
                         "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio})
        else:
            step /= 2
        greedy.append(best_ratio)
    params = {"alpha": alpha, "weight": weight, "m": list(grid.m), "family": family.kind,
              "count": family.count, "seed": family.seed, "rounds": rounds}
    return HardyReport(rows, float(best_ratio), best.describe(), greedy, params)


def seed_stability(domain: DomainSpec, p, alpha: float, grid: Grid, seeds=(42, 43, 44),
                   kind: str = "mixed", count: int = 12, weight: str = "a_omega",
                   rounds: int = 10) -> tuple:
    """Constant estimates for several family seeds and their relative spread."""
    ests = [estimate_hardy_constant(domain, p, alpha, grid, TestFamily(kind, count, s),
                                    weight, rounds).C_est for s in seeds]
    spread = (max(ests) - min(ests)) / max(ests)
    return ests, spread


class MultiplierReport(NamedTuple):
    C_est: float
    eps: list
    C_by_eps: list
    eps_change: float
    members: list


def multiplier_property_test(domain: DomainSpec, p, alpha: float, grid: Grid,
                             family: TestFamily | None = None, eps_cells=(8, 4, 2),
                             d_coeff: float | None = None,
                             check_admissible: bool = True) -> MultiplierReport:
    """||D_eps(chi I^alpha E phi)||_p / ||phi||_p over a family and an eps ladder.

    E is zero extension; chi times the potential vanishes outside the domain,
    so the lattice sum needs no far field.  ``C_est`` is the largest ratio at
    the smallest eps and ``eps_change`` its relative change from the
    previous rung.
    """
    p = resample(p, grid)
    if check_admissible and not alpha_admissible(p, grid.dim, alpha):
        raise ValueError("alpha must be < min(1, n/p_plus)")
    family = family or TestFamily()
    chi = chi_mask(domain, grid)
    h = grid.spacing
    eps = [k * h for k in eps_cells]
    per_eps = [0.0] * len(eps)
    rows = []
    for mem in family.members(domain):
        phi = mem.sample(grid, chi)
        rhs = luxemburg_norm(phi, p)
        F = riesz_potential(GriddedFunction(grid, phi.values), alpha).values
        g = GriddedFunction(grid, np.where(chi, F, 0.0))
        ratios = []
        for k, e in enumerate(eps):
            D = hypersingular_truncated(g, alpha, e, d_coeff).values
            ratios.append(luxemburg_norm(GriddedFunction(grid, D, chi), p) / rhs)
            per_eps[k] = max(per_eps[k], ratios[-1])
        rows.append({"member_id": mem.member_id, "kind": mem.kind, "ratios": ratios})
    change = abs(per_eps[-1] - per_eps[-2]) / per_eps[-1] if len(eps) > 1 else 0.0
    return MultiplierReport(per_eps[-1], eps, per_eps, change, rows)


def co_movement(domain: DomainSpec, p, alpha: float, grid: Grid,
                family: TestFamily | None = None, tol: float = 0.20,
                rounds: int = 10) -> dict:
    """Multiplier and a_Omega-weighted Hardy estimates on ``grid`` and its 2x refinement.

    Each estimate is stable when it changes by at most ``tol`` under the
    refinement.  ``cross_flag`` is raised when exactly one of them is stable.
    """
    family = family or TestFamily()
    fine = Grid(grid.origin, grid.extent, tuple(2 * k for k in grid.m))
    out = {}
    for name, g in (("coarse", grid), ("fine", fine)):
        mult = multiplier_property_test(domain, p, alpha, g, family)
        hardy = estimate_hardy_constant(domain, p, alpha, g, family, "a_omega", rounds)
        out[name] = {"multiplier": mult.C_est, "hardy": hardy.C_est}
    rel = {k: abs(out["fine"][k] - out["coarse"][k]) / out["fine"][k]
           for k in ("multiplier", "hardy")}
    stable = {k: bool(np.isfinite(out["fine"][k]) and rel[k] <= tol) for k in rel}
    return {"estimates": out, "change": rel, "stable": stable,
            "cross_flag": stable["multiplier"] != stable["hardy"]}


def strichartz_corollary_check(domain: DomainSpec, p_const: float, alpha: float, grid: Grid,
                               family: TestFamily | None = None, tol: float = 0.20,
                               rounds: int = 10) -> dict:
    """Delta-weighted Hardy constant at constant p on ``grid`` and its 2x refinement.

    Raises ValueError unless 1 < p < 1/alpha.
    """
    p_const = float(p_const)
    if not 1 < p_const < 1 / alpha:
        raise ValueError(f"constant p must lie in (1, 1/alpha) = (1, {1 / alpha:.6g})")
    N = max(strichartz_count(domain, grid, ax) for ax in range(grid.dim))
    fine = Grid(grid.origin, grid.extent, tuple(2 * k for k in grid.m))
    ests = [estimate_hardy_constant(domain, p_const, alpha, g, family, "delta", rounds).C_est
            for g in (grid, fine)]
    change = abs(ests[1] - ests[0]) / ests[1]
    return {"strichartz_N": N, "estimates": ests, "change": change,
            "finite": bool(np.all(np.isfinite(ests))), "stable": bool(change <= tol)}
