"""Uniform grids, domain geometry and midpoint quadrature.

A :class:`Grid` samples an axis-aligned window of R^n at cell centers.  A
:class:`DomainSpec` describes a bounded open set inside that window; a cell
belongs to the domain iff its center does.  :class:`GriddedFunction` holds
real samples on a grid, optionally restricted to a mask.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import ContainmentError

__all__ = [
    "Grid", "Shape", "Interval", "Box", "Ball", "Union", "Implicit",
    "annulus", "slit_disk", "DomainSpec", "GriddedFunction",
    "chi_mask", "boundary_distance", "extend_by_zero", "restrict",
    "integrate", "strichartz_count", "check_margin",
]

MIN_POINTS = 4


def _as_points(pts, dim):
    pts = np.asarray(pts, dtype=float)
    if dim == 1 and pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != dim:
        raise ValueError(f"expected points with {dim} coordinates, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Grid:
    """Cell-centered uniform sampling of the box ``origin + [0, extent]``.

    Parameters
    ----------
    origin : sequence of float
        Lower corner of the window.
    extent : sequence of float
        Side lengths per axis.
    m : int or sequence of int
        Cells per axis.
    """

    origin: tuple
    extent: tuple
    m: tuple

    def __post_init__(self):
        origin = tuple(float(v) for v in np.atleast_1d(self.origin))
        extent = tuple(float(v) for v in np.atleast_1d(self.extent))
        m = np.atleast_1d(self.m).astype(int)
        if m.size == 1:
            m = np.repeat(m, len(origin))
        m = tuple(int(v) for v in m)
        if not (len(origin) == len(extent) == len(m)):
            raise ValueError("origin, extent and m must agree in dimension")
        if len(origin) not in (1, 2, 3):
            raise ValueError("only n = 1, 2, 3 are supported")
        if min(m) < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} cells per axis, got {m}")
        if min(extent) <= 0:
            raise ValueError("extent must be positive")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "m", m)

    @classmethod
    def from_bounds(cls, lo, hi, m):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return cls(tuple(lo), tuple(hi - lo), m)

    @property
    def dim(self) -> int:
        return len(self.origin)

    @property
    def shape(self) -> tuple:
        return self.m

    @property
    def size(self) -> int:
        return int(np.prod(self.m))

    @property
    def h(self) -> tuple:
        return tuple(e / k for e, k in zip(self.extent, self.m))

    @property
    def is_isotropic(self) -> bool:
        h = self.h
        return all(math.isclose(v, h[0], rel_tol=1e-12) for v in h)

    @property
    def spacing(self) -> float:
        """Common cell size; only defined for isotropic grids."""
        if not self.is_isotropic:
            raise ValueError(f"grid cells are not square: h = {self.h}")
        return self.h[0]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.origin) + np.array(self.extent)

    def axes(self) -> list:
        """Cell-center coordinates along each axis."""
        return [o + (np.arange(k) + 0.5) * hk for o, k, hk in zip(self.origin, self.m, self.h)]

    def mesh(self) -> tuple:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """All cell centers as an ``(size, dim)`` array in row-major order."""
        return np.stack([c.ravel() for c in self.mesh()], axis=-1)

    def padded(self, k: int) -> "Grid":
        """The grid grown by ``k`` cells on every side, with the same spacing."""
        h = np.array(self.h)
        return Grid(tuple(self.lower - k * h), tuple(np.array(self.extent) + 2 * k * h),
                    tuple(v + 2 * k for v in self.m))

    def index_offset(self, other: "Grid") -> tuple:
        """Integer position of this grid's first cell inside ``other``."""
        if self.dim != other.dim or not np.allclose(self.h, other.h, rtol=1e-12):
            raise ValueError("grids have different spacing")
        off = (self.lower - other.lower) / np.array(self.h)
        ioff = np.rint(off)
        if not np.allclose(off, ioff, atol=1e-6):
            raise ValueError("grids are not aligned")
        return tuple(int(v) for v in ioff)

    def embed(self, values, other: "Grid") -> np.ndarray:
        """Copy ``values`` (on this grid) into a zero array on ``other``."""
        off = self.index_offset(other)
        out = np.zeros(other.shape)
        src, dst = [], []
        for o, k, K in zip(off, self.m, other.m):
            lo, hi = max(o, 0), min(o + k, K)
            if hi <= lo:
                return out
            dst.append(slice(lo, hi))
            src.append(slice(lo - o, hi - o))
        out[tuple(dst)] = np.asarray(values)[tuple(src)]
        return out

    def crop(self, values, other: "Grid") -> np.ndarray:
        """Read the part of ``values`` (given on ``other``) that lies on this grid."""
        return other.embed(values, self)

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "extent": list(self.extent), "m": list(self.m)}


class Shape:
    """Geometry of a bounded open set."""

    dim: int

    def contains(self, pts) -> np.ndarray:
        raise NotImplementedError

    def bounds(self) -> tuple:
        raise NotImplementedError

    def distance(self, pts):
        """Exact distance to the boundary for interior points, or None."""
        return None

    def project(self, pts):
        """Nearest point of the closure, or None when no closed form exists."""
        return None

    def diam(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(Shape):
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("interval needs a < b")

    dim = 1

    def contains(self, pts):
        x = _as_points(pts, 1)[:, 0]
        return (x > self.a) & (x < self.b)

    def bounds(self):
        return np.array([self.a]), np.array([self.b])

    def distance(self, pts):
        x = _as_points(pts, 1)[:, 0]
        return np.minimum(x - self.a, self.b - x)

    def project(self, pts):
        return np.clip(_as_points(pts, 1), self.a, self.b)

    def diam(self):
        return float(self.b - self.a)

    def to_dict(self):
        return {"kind": "interval", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Box(Shape):
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("box needs lo < hi on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)

    def contains(self, pts):
        x = _as_points(pts, self.dim)
        return np.all((x > np.array(self.lo)) & (x < np.array(self.hi)), axis=-1)

    def bounds(self):
        return np.array(self.lo), np.array(self.hi)

    def distance(self, pts):
        x = _as_points(pts, self.dim)
        return np.min(np.minimum(x - np.array(self.lo), np.array(self.hi) - x), axis=-1)

    def project(self, pts):
        return np.clip(_as_points(pts, self.dim), np.array(self.lo), np.array(self.hi))

    def to_dict(self):
        return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Ball(Shape):
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def dim(self):
        return len(self.center)

    def _r(self, pts):
        x = _as_points(pts, self.dim)
        return x, np.linalg.norm(x - np.array(self.center), axis=-1)

    def contains(self, pts):
        return self._r(pts)[1] < self.radius

    def bounds(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def distance(self, pts):
        return self.radius - self._r(pts)[1]

    def project(self, pts):
        x, r = self._r(pts)
        c = np.array(self.center)
        scale = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
        return c + (x - c) * scale[:, None]

    def diam(self):
        return 2.0 * self.radius

    def to_dict(self):
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


def _separated(s, t) -> bool:
    """True when the closures of two simple shapes are provably disjoint."""
    if isinstance(s, Ball) and isinstance(t, Ball):
        return np.linalg.norm(np.subtract(s.center, t.center)) > s.radius + t.radius
    if isinstance(s, (Box, Interval)) and isinstance(t, (Box, Interval)):
        (a0, a1), (b0, b1) = s.bounds(), t.bounds()
        return bool(np.any((a1 < b0) | (b1 < a0)))
    if isinstance(s, Ball) and isinstance(t, (Box, Interval)):
        s, t = t, s
    if isinstance(s, (Box, Interval)) and isinstance(t, Ball):
        lo, hi = s.bounds()
        c = np.array(t.center)
        return np.linalg.norm(c - np.clip(c, lo, hi)) > t.radius
    return False


@dataclass(frozen=True)
class Union(Shape):
    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("union needs at least one part")
        if len({p.dim for p in parts}) != 1:
            raise ValueError("union parts must share a dimension")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return self.parts[0].dim

    def contains(self, pts):
        out = self.parts[0].contains(pts)
        for p in self.parts[1:]:
            out = out | p.contains(pts)
        return out

    def bounds(self):
        lo = np.min([p.bounds()[0] for p in self.parts], axis=0)
        hi = np.max([p.bounds()[1] for p in self.parts], axis=0)
        return lo, hi

    def _disjoint(self):
        return all(_separated(s, t) for s, t in itertools.combinations(self.parts, 2))

    def distance(self, pts):
        # exact only when the parts have pairwise disjoint closures
        if not self._disjoint():
            return None
        dists = [p.distance(pts) for p in self.parts]
        if any(d is None for d in dists):
            return None
        inside = [p.contains(pts) for p in self.parts]
        out = np.zeros(len(dists[0]))
        for d, c in zip(dists, inside):
            out = np.where(c, d, out)
        return out

    def project(self, pts):
        projs = [p.project(pts) for p in self.parts]
        if any(q is None for q in projs):
            return None
        x = _as_points(pts, self.dim)
        gaps = np.stack([np.linalg.norm(q - x, axis=-1) for q in projs])
        best = np.argmin(gaps, axis=0)
        out = np.stack(projs)[best, np.arange(len(x))]
        return np.where(self.contains(x)[:, None], x, out)

    def to_dict(self):
        return {"kind": "union", "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True)
class Implicit(Shape):
    """Level-set domain ``{x : func(x) < 0}`` inside the box ``[lo, hi]``."""

    func: Callable
    lo: tuple
    hi: tuple
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in np.atleast_1d(self.lo)))
        object.__setattr__(self, "hi", tuple(float(v) for v in np.atleast_1d(self.hi)))

    @property
    def dim(self):
        return len(self.lo)

    def contains(self, pts):
        x = _as_points(pts, self.dim)
        inside = np.asarray(self.func(x)) < 0
        return inside & np.all((x > np.array(self.lo)) & (x < np.array(self.hi)), axis=-1)

    def bounds(self):
        return np.array(self.lo), np.array(self.hi)

    def to_dict(self):
        return dict(self.description) or {"kind": "implicit"}


def annulus(center, r_in, r_out) -> Implicit:
    c = np.asarray(center, dtype=float)

    def func(x):
        r = np.linalg.norm(x - c, axis=-1)
        return np.maximum(r_in - r, r - r_out)

    return Implicit(func, c - r_out, c + r_out,
                    {"kind": "annulus", "center": list(c), "r_in": r_in, "r_out": r_out})


def slit_disk(center, radius, width) -> Implicit:
    """Disk with the slab ``{0 <= x1 - c1 <= radius, |x2 - c2| <= width/2}`` removed."""
    c = np.asarray(center, dtype=float)

    def func(x):
        d = x - c
        disk = np.linalg.norm(d, axis=-1) - radius
        in_slit = (d[:, 0] >= 0) & (np.abs(d[:, 1]) <= width / 2)
        return np.where(in_slit, 1.0, disk)

    return Implicit(func, c - radius, c + radius,
                    {"kind": "slit_disk", "center": list(c), "radius": radius, "width": width})


@dataclass(frozen=True)
class DomainSpec:
    """A bounded domain plus the regularity flags the theory consumes.

    ``exterior_cone`` is declared by the user, never detected.
    """

    shape: Shape
    exterior_cone: bool = False
    strichartz_N: int | None = None

    @property
    def dim(self) -> int:
        return self.shape.dim

    def diam(self) -> float:
        return self.shape.diam()

    def bounds(self):
        return self.shape.bounds()

    def contains(self, pts):
        return self.shape.contains(pts)

    def to_dict(self) -> dict:
        d = {"shape": self.shape.to_dict(), "exterior_cone": self.exterior_cone}
        if self.strichartz_N is not None:
            d["strichartz_N"] = self.strichartz_N
        return d


@dataclass
class GriddedFunction:
    """Real samples on a grid; ``mask`` marks the support region when given."""

    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("gridded function values must be finite")
        self.values = v
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool).reshape(self.grid.shape)

    def region(self) -> np.ndarray:
        return self.mask if self.mask is not None else np.ones(self.grid.shape, dtype=bool)

    def with_values(self, values) -> "GriddedFunction":
        return GriddedFunction(self.grid, values, self.mask)

    def __mul__(self, c):
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__

    def to_csv(self, path_or_file) -> None:
        """Write ``x1..xn,value`` rows (row-major) for the cells in the region."""
        pts = self.grid.points()
        keep = self.region().ravel()
        vals = self.values.ravel()
        header = [f"x{i + 1}" for i in range(self.grid.dim)] + ["value"]

        def _write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for p, v in zip(pts[keep], vals[keep]):
                w.writerow([repr(float(c)) for c in p] + [repr(float(v))])

        if hasattr(path_or_file, "write"):
            _write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                _write(fh)

    @classmethod
    def from_csv(cls, path, grid: Grid) -> "GriddedFunction":
        """Read a CSV written by :meth:`to_csv`; missing cells become masked-out zeros."""
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        idx = np.rint((data[:, :grid.dim] - grid.lower) / np.array(grid.h) - 0.5).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(grid.shape)):
            raise ValueError("CSV points fall outside the grid")
        values = np.zeros(grid.shape)
        mask = np.zeros(grid.shape, dtype=bool)
        values[tuple(idx.T)] = data[:, -1]
        mask[tuple(idx.T)] = True
        return cls(grid, values, None if mask.all() else mask)


def _check_inside(domain: DomainSpec, grid: Grid) -> None:
    if domain.dim != grid.dim:
        raise ContainmentError(f"domain is {domain.dim}-D but the grid is {grid.dim}-D")
    lo, hi = domain.bounds()
    if np.any(lo < grid.lower) or np.any(hi > grid.upper):
        raise ContainmentError(
            f"domain bounds {lo.tolist()}..{hi.tolist()} exceed the window "
            f"{grid.lower.tolist()}..{grid.upper.tolist()}")


def check_margin(domain: DomainSpec, grid: Grid) -> None:
    """Require a gap of at least diam/4 between the domain and the window edge."""
    _check_inside(domain, grid)
    lo, hi = domain.bounds()
    gap = min(np.min(lo - grid.lower), np.min(grid.upper - hi))
    need = domain.diam() / 4
    if gap < need * (1 - 1e-12):
        raise ContainmentError(f"window margin {gap:.6g} is below diam/4 = {need:.6g}")


def chi_mask(domain: DomainSpec, grid: Grid) -> np.ndarray:
    """Boolean array marking the cells whose centers lie in the domain."""
    _check_inside(domain, grid)
    return np.asarray(domain.contains(grid.points())).reshape(grid.shape)


def boundary_distance(domain: DomainSpec, grid: Grid) -> GriddedFunction:
    """Distance from each interior cell center to the boundary.

    Closed forms are used where the shape has one.  Otherwise the Euclidean
    distance transform gives the distance to the nearest exterior cell center,
    from which half a cell is subtracted (exact for cell-aligned faces).
    """
    chi = chi_mask(domain, grid)
    exact = domain.shape.distance(grid.points())
    if exact is not None:
        d = np.asarray(exact).reshape(grid.shape)
    else:
        d = ndimage.distance_transform_edt(chi, sampling=grid.h)
        d = np.maximum(d - 0.5 * min(grid.h), 0.5 * min(grid.h))
    return GriddedFunction(grid, np.where(chi, d, 0.0), chi)


def extend_by_zero(f: GriddedFunction) -> GriddedFunction:
    """Zero extension of a masked function to the whole window."""
    if f.mask is None:
        raise ValueError("extend_by_zero needs a function masked to the domain")
    return GriddedFunction(f.grid, np.where(f.mask, f.values, 0.0), None)


def restrict(f: GriddedFunction, domain) -> GriddedFunction:
    """Restriction to the domain: values outside are dropped (set to zero and masked out)."""
    chi = domain if isinstance(domain, np.ndarray) else chi_mask(domain, f.grid)
    return GriddedFunction(f.grid, np.where(chi, f.values, 0.0), chi)


def _region_mask(f: GriddedFunction, region) -> np.ndarray:
    if region is None:
        return f.region()
    if isinstance(region, DomainSpec):
        return chi_mask(region, f.grid)
    if isinstance(region, str):
        if region != "window":
            raise ValueError(f"unknown region {region!r}")
        return np.ones(f.grid.shape, dtype=bool)
    return np.asarray(region, dtype=bool).reshape(f.grid.shape)


def integrate(f: GriddedFunction, region=None) -> float:
    """Midpoint rule ``sum(values * h^n)`` over ``region``.

    ``region`` may be None (the function's own mask, else the window), the
    string ``"window"``, a :class:`DomainSpec` or a boolean mask.  Summation is
    exactly rounded, so the result does not depend on summation order.
    """
    mask = _region_mask(f, region)
    return math.fsum(f.values[mask].tolist()) * f.grid.cell_volume


def strichartz_count(domain: DomainSpec, grid: Grid, axis: int = 0) -> int:
    """Largest number of in-domain runs along grid lines parallel to ``axis``."""
    chi = np.moveaxis(chi_mask(domain, grid), axis, -1).astype(np.int8)
    starts = np.diff(chi, axis=-1, prepend=0) == 1
    return int(starts.sum(axis=-1).max()) if chi.size else 0
