"""JSON run configuration: parsing, defaults and precondition checks."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContainmentError, ValidationError
from .exponent import ExponentField, class_P_check
from .grid_domain import (Ball, Box, DomainSpec, Grid, GriddedFunction, Interval, Union,
                          annulus, check_margin, chi_mask, slit_disk)
from .hardy import TestFamily, alpha_admissible

__all__ = ["RunConfig", "parse_config", "load_config", "build_domain", "build_exponent",
           "build_phi", "DEFAULT_M"]

DEFAULT_M = {1: 1024, 2: 128}
DEFAULT_EPS_CELLS = (8, 4, 2)


@dataclass
class RunConfig:
    raw: dict
    domain: DomainSpec
    grid: Grid
    p: ExponentField
    alpha: float
    ell: int
    eps_cells: tuple
    rel_tol: float
    seed: int
    family: TestFamily
    weight: str
    phi: GriddedFunction
    out: str | None = None
    resolved: dict = field(default_factory=dict)

    @property
    def epsilons(self) -> list:
        return [k * self.grid.spacing for k in self.eps_cells]


def _need(d, key, where):
    if key not in d:
        raise ConfigError(f"missing field '{where}{key}'", field=f"{where}{key}")
    return d[key]


def _vec(v, name, dim=None):
    try:
        arr = [float(x) for x in (v if isinstance(v, (list, tuple)) else [v])]
    except (TypeError, ValueError):
        raise ConfigError(f"field '{name}' must be a number or list of numbers", field=name)
    if dim is not None and len(arr) != dim:
        raise ConfigError(f"field '{name}' needs {dim} entries", field=name)
    return arr


def _shape(spec, where="domain."):
    if not isinstance(spec, dict):
        raise ConfigError(f"field '{where[:-1]}' must be an object", field=where[:-1])
    kind = _need(spec, "kind", where)
    try:
        if kind == "interval":
            return Interval(float(_need(spec, "a", where)), float(_need(spec, "b", where)))
        if kind == "box":
            return Box(tuple(_vec(_need(spec, "lo", where), where + "lo")),
                       tuple(_vec(_need(spec, "hi", where), where + "hi")))
        if kind == "ball":
            return Ball(tuple(_vec(_need(spec, "center", where), where + "center")),
                        float(_need(spec, "radius", where)))
        if kind == "union":
            parts = _need(spec, "parts", where)
            return Union(tuple(_shape(p, f"{where}parts[{i}].") for i, p in enumerate(parts)))
        if kind == "annulus":
            return annulus(_vec(_need(spec, "center", where), where + "center", 2),
                           float(_need(spec, "r_in", where)), float(_need(spec, "r_out", where)))
        if kind == "slit_disk":
            return slit_disk(_vec(_need(spec, "center", where), where + "center", 2),
                             float(_need(spec, "radius", where)), float(_need(spec, "width", where)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid '{where[:-1]}': {exc}", field=where[:-1])
    raise ConfigError(f"unknown domain kind {kind!r}", field=where + "kind")


def build_domain(raw: dict) -> DomainSpec:
    spec = _need(raw, "domain", "")
    shape = _shape(spec)
    cone = bool(spec.get("exterior_cone", raw.get("exterior_cone", False)))
    N = spec.get("strichartz_N", raw.get("strichartz_N"))
    return DomainSpec(shape, cone, None if N is None else int(N))


def _build_grid(raw, domain):
    gspec = raw.get("grid", {})
    n = domain.dim
    m = gspec.get("m", DEFAULT_M.get(n, 32))
    win = gspec.get("window")
    if win is None:
        lo, hi = domain.bounds()
        half = domain.diam() / 2
        lo, hi = lo - half, hi + half
    else:
        lo = np.array(_vec(_need(win, "lo", "grid.window."), "grid.window.lo", n))
        hi = np.array(_vec(_need(win, "hi", "grid.window."), "grid.window.hi", n))
    try:
        if isinstance(m, int):
            # keep cells square: the longest side gets m cells, the others
            # are widened symmetrically to a whole number of cells
            side = hi - lo
            h = side.max() / m
            ms = np.maximum(np.ceil(side / h - 1e-9), 1).astype(int)
            grow = (ms * h - side) / 2
            lo, hi = lo - grow, lo - grow + ms * h
            ms = tuple(int(k) for k in ms)
        else:
            ms = tuple(int(v) for v in m)
        return Grid.from_bounds(lo, hi, ms)
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}", field="grid")


def build_exponent(spec, grid: Grid, chi, base_dir="."):
    if not isinstance(spec, dict):
        raise ConfigError("field 'p' must be an object", field="p")
    kind = _need(spec, "kind", "p.")
    if kind == "const":
        return ExponentField.constant(grid, float(_need(spec, "value", "p.")), chi)
    if kind == "affine":
        g = _vec(_need(spec, "gradient", "p."), "p.gradient", grid.dim)
        return ExponentField.affine(grid, g, float(_need(spec, "offset", "p.")), chi)
    if kind == "table":
        path = os.path.join(base_dir, _need(spec, "csv", "p."))
        try:
            table = GriddedFunction.from_csv(path, grid)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read exponent table: {exc}", field="p.csv")
        if table.mask is not None and np.any(chi & ~table.mask):
            raise ConfigError("exponent table does not cover the domain", field="p.csv")
        return ExponentField(grid, table.values, chi if table.mask is None else table.mask & chi)
    raise ConfigError(f"unknown exponent kind {kind!r}", field="p.kind")


def build_phi(spec, domain: DomainSpec, grid: Grid, base_dir="."):
    chi = chi_mask(domain, grid)
    lo, hi = domain.bounds()
    spec = spec or {"kind": "gaussian"}
    kind = spec.get("kind", "gaussian")
    pts = grid.points()
    if kind == "gaussian":
        c = np.array(_vec(spec.get("center", list((lo + hi) / 2)), "phi.center", grid.dim))
        w = float(spec.get("width", domain.diam() / 10))
        vals = np.exp(-np.sum((pts - c) ** 2, axis=-1) / (2 * w * w))
    elif kind == "const":
        vals = np.full(len(pts), float(spec.get("value", 1.0)))
    elif kind == "csv":
        path = os.path.join(base_dir, _need(spec, "path", "phi."))
        try:
            vals = GriddedFunction.from_csv(path, grid).values.ravel()
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read phi table: {exc}", field="phi.path")
    else:
        raise ConfigError(f"unknown phi kind {kind!r}", field="phi.kind")
    vals = vals.reshape(grid.shape)
    return GriddedFunction(grid, np.where(chi, vals, 0.0), chi)


def parse_config(raw: dict, base_dir: str = ".") -> RunConfig:
    """Validate a decoded configuration object and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    domain = build_domain(raw)
    grid = _build_grid(raw, domain)
    try:
        check_margin(domain, grid)
    except ContainmentError as exc:
        raise ValidationError(str(exc), field="grid.window")
    chi = chi_mask(domain, grid)
    p = build_exponent(_need(raw, "p", ""), grid, chi, base_dir)
    try:
        alpha = float(_need(raw, "alpha", ""))
    except (TypeError, ValueError):
        raise ConfigError("field 'alpha' must be a number", field="alpha")
    cls = class_P_check(p)
    if not cls.in_class:
        raise ValidationError("p must satisfy 1 < p_minus <= p_plus < inf", field="p")
    if not alpha_admissible(p, grid.dim, alpha):
        raise ValidationError("alpha must be < min(1, n/p_plus)", field="alpha")
    ell = int(raw.get("ell", 1))
    if ell != 1:
        raise ValidationError("only ell = 1 is supported downstream", field="ell")
    eps_cells = tuple(float(v) for v in raw.get("eps_cells", DEFAULT_EPS_CELLS))
    if any(b >= a for a, b in zip(eps_cells, eps_cells[1:])):
        raise ValidationError("eps_cells must be strictly decreasing", field="eps_cells")
    if min(eps_cells) < 2:
        raise ValidationError("eps must be at least 2h", field="eps_cells")
    rel_tol = float(raw.get("rel_tol", 1e-10))
    if not 0 < rel_tol <= 1e-3:
        raise ValidationError("rel_tol must lie in (0, 1e-3]", field="rel_tol")
    seed = int(raw.get("seed", 42))
    if not 0 <= seed < 2 ** 64:
        raise ValidationError("seed must be an unsigned 64-bit integer", field="seed")
    fam = raw.get("family", {})
    family = TestFamily(fam.get("kind", "mixed"), int(fam.get("count", 12)),
                        int(fam.get("seed", seed)))
    weight = raw.get("weight", "a_omega")
    if weight not in ("delta", "a_omega"):
        raise ValidationError("weight must be 'delta' or 'a_omega'", field="weight")
    phi = build_phi(raw.get("phi"), domain, grid, base_dir)
    cfg = RunConfig(raw, domain, grid, p, alpha, ell, eps_cells, rel_tol, seed, family,
                    weight, phi, raw.get("out"))
    cfg.resolved = {
        "domain": domain.to_dict(), "grid": grid.to_dict(), "p": raw["p"],
        "p_minus": cls.p_minus, "p_plus": cls.p_plus, "alpha": alpha, "ell": ell,
        "eps_cells": list(eps_cells), "rel_tol": rel_tol, "seed": seed,
        "family": {"kind": family.kind, "count": family.count, "seed": family.seed},
        "weight": weight, "phi": raw.get("phi", {"kind": "gaussian"}),
    }
    return cfg


def load_config(path: str) -> RunConfig:
    """Read, decode and validate a configuration file."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}")
    try:
        text = data.decode("utf-8")
        raw = json.loads(text)
    except UnicodeDecodeError as exc:
        raise ConfigError(f"configuration is not UTF-8 (byte offset {exc.start})")
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ConfigError(f"malformed JSON at byte offset {offset}: {exc.msg}")
    return parse_config(raw, os.path.dirname(os.path.abspath(path)))
