"""Acceptance suite: thirteen numbered checks with fixed setups and thresholds.

Each check returns a :class:`Criterion` row.  The rows are shared by the
``report-all`` command and the test suite, so both judge the same numbers.
Observed values are rendered with ``repr`` so that reruns can be compared
byte for byte.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from ._rng import stream
from .exponent import ExponentField
from .grid_domain import Ball, Box, DomainSpec, Grid, GriddedFunction, Interval, Union, chi_mask
from .hardy import TestFamily, co_movement, strichartz_corollary_check
from .kernels import calibration_drift, cancellation_check, decay_slope, sphere_area
from .luxemburg import luxemburg_norm, modular_norm_bracket
from .operators import (a_omega, domination_check, inversion_error,
                        marchaud_decomposition_residual, weight_equivalence_check)

__all__ = ["Criterion", "CRITERIA", "run_criterion", "run_all", "summary_csv", "max_workers"]

ALPHAS = (0.25, 0.5, 0.75)


class Criterion(NamedTuple):
    id: int
    name: str
    observed: str
    threshold: str
    passed: bool
    details: dict

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.id:>2} {self.name}: {self.observed} (need {self.threshold})"


def _fmt(x) -> str:
    return repr(float(x))


def _interval(cone=True):
    return DomainSpec(Interval(-1.0, 1.0), exterior_cone=cone)


def _disk(cone=True):
    return DomainSpec(Ball((0.0, 0.0), 1.0), exterior_cone=cone)


def _square(cone=True):
    return DomainSpec(Box((-1.0, -1.0), (1.0, 1.0)), exterior_cone=cone)


def _window(n, m):
    return Grid((-2.0,) * n, (4.0,) * n, m)


def _gaussian(grid, sigma):
    r2 = sum(c ** 2 for c in grid.mesh())
    return GriddedFunction(grid, np.exp(-r2 / (2 * sigma ** 2)))


# 1 -----------------------------------------------------------------------

def luxemburg_reduction(seed: int = 42) -> Criterion:
    grid = Grid((0.0,), (1.0,), 1024)
    h = grid.spacing
    worst = 0.0
    for p in (1.5, 2.0, 3.0):
        rng = stream(seed, "luxemburg-reduction", p)
        for _ in range(50):
            amp = 10.0 ** rng.uniform(-3, 3)
            v = amp * rng.standard_normal(grid.shape)
            exact = (math.fsum((np.abs(v) ** p).tolist()) * h) ** (1 / p)
            got = luxemburg_norm(GriddedFunction(grid, v), p)
            worst = max(worst, abs(got - exact) / exact)
    return Criterion(1, "Luxemburg norm at constant p", _fmt(worst), "< 1e-08",
                     worst < 1e-8, {"max_rel_error": worst})


# 2 -----------------------------------------------------------------------

def _random_pair(rng, k):
    if k % 5 == 4:
        grid = Grid((0.0, 0.0), (1.0, 1.0), 32)
    else:
        grid = Grid((0.0,), (1.0,), 256)
    amp = 10.0 ** rng.uniform(-3, 3)
    v = amp * rng.standard_normal(grid.shape) * (rng.random(grid.shape) < rng.uniform(0.1, 1))
    if not np.any(v):
        v.flat[0] = amp
    if k % 2:
        p = ExponentField(grid, rng.uniform(1.05, 6.0, grid.shape))
    else:
        g = rng.uniform(-0.5, 1.5, grid.dim)
        p = ExponentField.affine(grid, g, float(rng.uniform(1.6, 3.0)))
    return GriddedFunction(grid, v), p


def modular_bracket(seed: int = 42) -> Criterion:
    rng = stream(seed, "modular-bracket")
    violations = 0
    for k in range(100):
        f, p = _random_pair(rng, k)
        violations += not modular_norm_bracket(f, p, slack=1e-12).holds
    return Criterion(2, "modular-norm bracket", str(violations), "== 0 of 100",
                     violations == 0, {"violations": violations})


# 3 -----------------------------------------------------------------------

def kernel_cancellation(seed: int = 42) -> Criterion:
    worst, ok, rows = 0.0, True, []
    for n in (1, 2):
        for a in ALPHAS:
            for N in (2, 5):
                c = cancellation_check(n, a, 1, N)
                worst = max(worst, c.residual)
                ok &= c.residual < 1e-3 and c.decreases
                rows.append({"n": n, "alpha": a, "N": N, **c._asdict()})
    return Criterion(3, "kernel cancellation", _fmt(worst), "< 1e-03 and decreasing",
                     bool(ok), {"rows": rows})


# 4 -----------------------------------------------------------------------

def kernel_decay(seed: int = 42) -> Criterion:
    worst, rows = 0.0, []
    for n in (1, 2):
        for a in ALPHAS:
            s = decay_slope(n, a, 2.0, 50.0)
            dev = abs(s - (a - n - 1))
            worst = max(worst, dev)
            rows.append({"n": n, "alpha": a, "slope": s, "target": a - n - 1})
    return Criterion(4, "kernel decay slope", _fmt(worst), "<= 0.05", worst <= 0.05,
                     {"max_deviation": worst, "rows": rows})


# 5 -----------------------------------------------------------------------

def weight_upper_bound(seed: int = 42) -> Criterion:
    worst, rows = 0.0, []
    cases = (("interval", _interval(), _window(1, 1024)),
             ("disk", _disk(), _window(2, 128)),
             ("square", _square(), _window(2, 128)))
    closed = 0.0
    for a in ALPHAS:
        for name, dom, grid in cases:
            w = a_omega(dom, a, grid)
            chk = weight_equivalence_check(dom, a, grid, weight=w)
            worst = max(worst, chk.c1_ratio)
            rows.append({"domain": name, "alpha": a, "c1_ratio": chk.c1_ratio})
            if name == "interval":
                x = grid.axes()[0]
                for x0 in (0.0, 0.5, -0.5):
                    i = int(np.argmin(np.abs(x - x0)))
                    exact = ((1 - x[i]) ** -a + (1 + x[i]) ** -a) / a
                    closed = max(closed, abs(w.values[i] - exact) / exact)
    ok = worst <= 1.02 and closed <= 1e-4
    return Criterion(5, "weight upper bound", f"{_fmt(worst)};{_fmt(closed)}",
                     "ratio <= 1.02;closed-form rel <= 1e-04", bool(ok),
                     {"max_ratio": worst, "closed_form_rel": closed, "rows": rows})


# 6 -----------------------------------------------------------------------

def weight_lower_bound(seed: int = 42) -> Criterion:
    a = 0.5
    rows, worst = [], 0.0
    for name, dom, n, ms in (("interval", _interval(), 1, (1024, 2048)),
                             ("disk", _disk(), 2, (128, 256))):
        c2 = [weight_equivalence_check(dom, a, _window(n, m)).c2_est for m in ms]
        ch = abs(c2[1] - c2[0]) / c2[1]
        worst = max(worst, ch)
        rows.append({"domain": name, "m": list(ms), "c2_est": c2, "change": ch})
    return Criterion(6, "weight lower bound stability", _fmt(worst), "<= 0.10",
                     worst <= 0.10, {"rows": rows})


# 7 -----------------------------------------------------------------------

def inversion(seed: int = 42) -> Criterion:
    out = {}
    for n, m, sigma in ((1, 2048, 0.2), (2, 128, 0.25)):
        grid = _window(n, m)
        p = ExponentField.affine(grid, [0.1] * n, 1.6)
        out[n] = inversion_error(_gaussian(grid, sigma), 0.5, p).errors
    e1, e2 = out[1], out[2]
    dec = all(b < a for a, b in zip(e1, e1[1:]))
    ok = e1[-1] < 0.05 and dec and e2[-1] < 0.10
    return Criterion(7, "inversion of the potential", f"{_fmt(e1[-1])};{_fmt(e2[-1])}",
                     "1-D < 0.05 and decreasing;2-D < 0.10", bool(ok),
                     {"errors_1d": e1, "errors_2d": e2, "decreasing_1d": dec})


# 8 -----------------------------------------------------------------------

def calibration_stability(seed: int = 42) -> Criterion:
    rows = [{"n": n, "alpha": a, "drift": calibration_drift(n, a)} for n in (1, 2) for a in ALPHAS]
    worst = max(r["drift"] for r in rows)
    return Criterion(8, "d calibration drift", _fmt(worst), "< 0.01", worst < 0.01,
                     {"rows": rows})


# 9 -----------------------------------------------------------------------

def decomposition(seed: int = 42) -> Criterion:
    rel = []
    for m in (2048, 4096):
        grid = _window(1, m)
        rel.append(marchaud_decomposition_residual(_gaussian(grid, 0.2), _interval(), 0.5).relative)
    ok = rel[0] < 1e-2 and rel[1] <= rel[0] / 2
    return Criterion(9, "decomposition residual", f"{_fmt(rel[0])};{_fmt(rel[1])}",
                     "< 1e-02;halves on refinement", bool(ok), {"relative": rel})


# 10 ----------------------------------------------------------------------

def domination(seed: int = 42) -> Criterion:
    rows, ok, worst = [], True, 0.0
    for name, dom, grid in (("interval", _interval(), _window(1, 1024)),
                            ("disk", _disk(), _window(2, 256))):
        chi = chi_mask(dom, grid)
        fam = TestFamily("bump", 20, seed).members(dom)
        fs = [mem.sample(grid, chi) for mem in fam]
        h = grid.spacing
        r = domination_check(dom, 0.5, fs, [16 * h, 8 * h, 4 * h])
        ch = abs(r.C_extended - r.C_est) / r.C_est
        worst = max(worst, ch)
        ok &= r.uniform
        rows.append({"domain": name, "m": list(grid.m), **r._asdict(), "change": ch})
    return Criterion(10, "domination by the maximal function", _fmt(worst), "<= 0.10",
                     bool(ok), {"rows": rows})


# 11 ----------------------------------------------------------------------

def co_movement_check(seed: int = 42) -> Criterion:
    cases = (("interval", _interval(), _window(1, 1024), [0.2]),
             ("disk", _disk(), _window(2, 128), [0.2, 0.1]),
             ("square", _square(), _window(2, 128), [0.2, 0.1]))
    rows, ok, worst = [], True, 0.0
    for name, dom, grid, grad in cases:
        p = ExponentField.affine(grid, grad, 1.8)
        r = co_movement(dom, p, 0.25, grid, TestFamily("mixed", 12, seed))
        fin = all(np.isfinite(v) for est in r["estimates"].values() for v in est.values())
        ok &= fin and all(r["stable"].values()) and not r["cross_flag"]
        worst = max([worst] + list(r["change"].values()))
        rows.append({"domain": name, **r})
    return Criterion(11, "multiplier and Hardy co-movement", _fmt(worst),
                     "<= 0.20 and no cross-flag", bool(ok), {"rows": rows})


# 12 ----------------------------------------------------------------------

def strichartz(seed: int = 42) -> Criterion:
    union = DomainSpec(Union((Ball((-1.0, 0.0), 0.8), Ball((1.0, 0.0), 0.8))))
    cases = (("interval", _interval(), _window(1, 1024)),
             ("two-ball union", union, Grid((-3.6, -2.8), (7.2, 7.2), 128)))
    rows, ok, worst = [], True, 0.0
    fam = TestFamily("mixed", 12, seed)
    for name, dom, grid in cases:
        r = strichartz_corollary_check(dom, 1.5, 0.5, grid, fam)
        ok &= r["finite"] and r["stable"]
        worst = max(worst, r["change"])
        rows.append({"domain": name, **r})
    try:
        strichartz_corollary_check(cases[0][1], 3.0, 0.5, cases[0][2], fam)
        rejected = False
    except ValueError:
        rejected = True
    return Criterion(12, "constant-exponent Hardy corollary", f"{_fmt(worst)};rejected={rejected}",
                     "<= 0.20;p=3 rejected", bool(ok and rejected), {"rows": rows})


# 13 ----------------------------------------------------------------------

DETERMINISM_IDS = (1, 2, 3)


def determinism(seed: int = 42) -> Criterion:
    """Rerun the seeded cheap checks at several worker counts; compare CSV bytes."""
    counts = sorted({1, 2, max_workers()})
    blobs = [summary_csv(run_all(seed, w, DETERMINISM_IDS)) for w in counts]
    same = all(b == blobs[0] for b in blobs)
    return Criterion(13, "determinism across worker counts",
                     f"identical={same};workers={'/'.join(map(str, counts))}",
                     "byte-identical", same, {"workers": counts})


CRITERIA = {
    1: luxemburg_reduction, 2: modular_bracket, 3: kernel_cancellation, 4: kernel_decay,
    5: weight_upper_bound, 6: weight_lower_bound, 7: inversion, 8: calibration_stability,
    9: decomposition, 10: domination, 11: co_movement_check, 12: strichartz,
    13: determinism,
}


def max_workers() -> int:
    return os.cpu_count() or 1


def run_criterion(cid: int, seed: int = 42) -> Criterion:
    return CRITERIA[cid](seed)


def run_all(seed: int = 42, workers: int = 1, ids=None) -> list:
    """Run the selected checks (all by default) and return rows in id order."""
    ids = sorted(CRITERIA) if ids is None else list(ids)
    if workers <= 1:
        return [run_criterion(i, seed) for i in ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: run_criterion(i, seed), ids))


def summary_csv(rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "observed", "threshold", "pass"])
    for r in rows:
        w.writerow([r.id, r.observed, r.threshold, "true" if r.passed else "false"])
    return buf.getvalue().encode("utf-8")
