"""Command line front end: ``hardylab <command> --config <path> [--out DIR] [--seed N]``.

Exit codes: 0 ok, 1 a numeric check failed, 2 usage, 3 configuration,
4 runtime error.  Every output directory receives a ``MANIFEST.json`` that
echoes the resolved configuration and lists the artifacts written; it is
marked incomplete when the command fails part way.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import acceptance
from .config import RunConfig, load_config
from .errors import ConfigError
from .grid_domain import GriddedFunction
from .hardy import estimate_hardy_constant, multiplier_property_test
from .kernels import (calibration_drift, cancellation_check, d_coefficient, decay_check,
                      decay_slope, rotation_identity_rhs, diff_kernel, whole_space_residual)
from .luxemburg import luxemburg_norm, modular_norm_bracket
from .operators import (a_omega, inversion_error, maximal, potential_far_field,
                        riesz_derivative, riesz_potential, weight_equivalence_check)
from ._rng import stream

__all__ = ["main", "COMMANDS"]

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3, 4
DIRECT_CHECK_MAX_CELLS = 20_000


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


class Output:
    """Output directory with a manifest that tracks written artifacts."""

    def __init__(self, path: str, command: str, cfg: RunConfig, workers: int):
        self.path = path
        os.makedirs(path, exist_ok=True)
        self.manifest = {"tool": "hardylab", "version": __version__, "command": command,
                         "seed": cfg.seed, "workers": workers, "config": cfg.resolved,
                         "artifacts": [], "complete": False, "error": None}
        self.flush()

    def file(self, name: str) -> str:
        self.manifest["artifacts"].append(name)
        self.flush()
        return os.path.join(self.path, name)

    def json(self, name: str, data) -> None:
        with open(self.file(name), "w") as fh:
            json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def csv(self, name: str, header, rows) -> None:
        with open(self.file(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                            for v in r])

    def gridded(self, name: str, f: GriddedFunction) -> None:
        f.to_csv(self.file(name))

    def finish(self, error: str | None = None) -> None:
        self.manifest["complete"] = error is None
        self.manifest["error"] = error
        self.flush()

    def flush(self) -> None:
        with open(os.path.join(self.path, "MANIFEST.json"), "w") as fh:
            json.dump(_jsonable(self.manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")


def ordered_map(func, items, workers: int) -> list:
    """``[func(x) for x in items]``, optionally on a thread pool; order is kept."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# commands ----------------------------------------------------------------

def cmd_norm(cfg: RunConfig, out: Output, workers: int) -> int:
    b = modular_norm_bracket(cfg.phi, cfg.p, rel_tol=cfg.rel_tol)
    data = b._asdict()
    out.json("norm.json", {"parameters": cfg.resolved, **data})
    out.csv("norm.csv", ["quantity", "value"],
            [[k, float(v)] for k, v in data.items() if k != "holds"])
    return EXIT_OK if b.holds else EXIT_NUMERIC


def cmd_potential(cfg: RunConfig, out: Output, workers: int) -> int:
    u = riesz_potential(cfg.phi, cfg.alpha)
    side = {"alpha": cfg.alpha, "normalized": True, "method": "fft", "fft_direct_max_rel": None}
    if cfg.grid.size <= DIRECT_CHECK_MAX_CELLS:
        v = riesz_potential(cfg.phi, cfg.alpha, method="direct").values
        side["fft_direct_max_rel"] = float(np.max(np.abs(u.values - v)) / np.max(np.abs(v)))
    out.gridded("potential.csv", u)
    out.json("potential.json", {"parameters": cfg.resolved, **side})
    return EXIT_OK


def cmd_derivative(cfg: RunConfig, out: Output, workers: int) -> int:
    u = riesz_potential(cfg.phi, cfg.alpha)
    far = potential_far_field(cfg.phi, cfg.alpha)
    res = riesz_derivative(u, cfg.alpha, cfg.epsilons, cfg.p, far_field=far,
                           region=cfg.p.mask)
    out.gridded("derivative.csv", GriddedFunction(cfg.grid, res.limit.values, cfg.p.mask))
    out.csv("derivative_ladder.csv", ["eps", "distance"],
            [[r["eps"], "" if r["distance"] is None else r["distance"]] for r in res.table])
    out.json("derivative.json", {"parameters": cfg.resolved, "alpha": cfg.alpha,
                                 "d_coeff": d_coefficient(cfg.grid.dim, cfg.alpha),
                                 "ladder": res.table, "converged": res.converged})
    return EXIT_OK if res.converged else EXIT_NUMERIC


def cmd_maximal(cfg: RunConfig, out: Output, workers: int) -> int:
    M = maximal(cfg.phi, cfg.domain)
    out.gridded("maximal.csv", M)
    out.json("maximal.json", {"parameters": cfg.resolved,
                              "sup": float(np.max(M.values[M.region()])),
                              "phi_sup": float(np.max(np.abs(cfg.phi.values)))})
    return EXIT_OK


def cmd_weights(cfg: RunConfig, out: Output, workers: int) -> int:
    w = a_omega(cfg.domain, cfg.alpha, cfg.grid)
    chk = weight_equivalence_check(cfg.domain, cfg.alpha, cfg.grid, weight=w)
    out.gridded("weights.csv", w.as_function())
    out.json("weights.json", {"parameters": cfg.resolved, **chk._asdict()})
    return EXIT_OK if chk.c1_holds else EXIT_NUMERIC


def _kernel_rows(n, alpha, seed, workers):
    rows = []
    tasks = [(N, q) for N in (2, 5) for q in (16,)]
    for (N, q), c in zip(tasks, ordered_map(lambda t: cancellation_check(n, alpha, 1, t[0], t[1]),
                                            tasks, workers)):
        ps = f"n={n};alpha={alpha!r};ell=1;N={N}"
        rows.append(["cancellation", ps, c.residual, q])
        rows.append(["cancellation", ps, c.residual_refined, 4 * q])
    slope = decay_slope(n, alpha, 2.0, 50.0)
    rows.append(["decay_slope", f"n={n};alpha={alpha!r};r=[2,50]",
                 abs(slope - (alpha - n - 1)), 200])
    dc = decay_check(n, alpha, 1)
    rows.append(["decay_constant", f"n={n};alpha={alpha!r};ell=1",
                 abs(dc.c_fit_doubled - dc.c_fit) / dc.c_fit, 200])
    rng = stream(seed, "kernels", "rotation")
    x = rng.uniform(-3, 3, (64, n))
    h = rng.uniform(-1, 1, (64, n))
    lhs = diff_kernel(n, alpha, 1, x, h)
    rhs = rotation_identity_rhs(n, alpha, 1, x, h)
    rows.append(["rotation", f"n={n};alpha={alpha!r};ell=1",
                 float(np.max(np.abs(lhs - rhs) / np.abs(lhs))), 64])
    for R in (10.0, 100.0):
        rows.append(["whole_space", f"n={n};alpha={alpha!r};ell=1;R={R!r}",
                     whole_space_residual(n, alpha, 1, R), 64])
    rows.append(["calibration_drift", f"n={n};alpha={alpha!r}", calibration_drift(n, alpha), 4])
    return rows


def cmd_kernels(cfg: RunConfig, out: Output, workers: int) -> int:
    n, alpha = cfg.grid.dim, cfg.alpha
    rows = _kernel_rows(n, alpha, cfg.seed, workers)
    out.csv("kernels.csv", ["identity", "parameter_set", "residual", "budget"], rows)
    canc = [r[2] for r in rows if r[0] == "cancellation"]
    slope = next(r[2] for r in rows if r[0] == "decay_slope")
    ok = max(canc) < 1e-3 and slope <= 0.05
    out.json("kernels.json", {"parameters": cfg.resolved,
                              "d_coeff": d_coefficient(n, alpha),
                              "max_cancellation": max(canc), "slope_deviation": slope,
                              "pass": ok})
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_invert(cfg: RunConfig, out: Output, workers: int) -> int:
    res = inversion_error(cfg.phi, cfg.alpha, cfg.p, cfg.eps_cells)
    out.csv("inversion.csv", ["eps", "error"], list(zip(res.eps, res.errors)))
    dec = all(b < a for a, b in zip(res.errors, res.errors[1:]))
    out.json("inversion.json", {"parameters": cfg.resolved, "errors": res.errors,
                                "eps": res.eps, "decreasing": dec})
    return EXIT_OK if dec else EXIT_NUMERIC


def cmd_hardy(cfg: RunConfig, out: Output, workers: int) -> int:
    rep = estimate_hardy_constant(cfg.domain, cfg.p, cfg.alpha, cfg.grid, cfg.family, cfg.weight)
    out.csv("hardy.csv", ["member_id", "kind", "lhs", "rhs", "ratio"], rep.table())
    mult = multiplier_property_test(cfg.domain, cfg.p, cfg.alpha, cfg.grid, cfg.family,
                                    cfg.eps_cells)
    out.json("hardy.json", {"parameters": cfg.resolved, **rep.to_dict(),
                            "multiplier": {"C_est": mult.C_est, "eps": mult.eps,
                                           "C_by_eps": mult.C_by_eps,
                                           "eps_change": mult.eps_change}})
    return EXIT_OK if np.isfinite(rep.C_est) else EXIT_NUMERIC


def cmd_report_all(cfg: RunConfig, out: Output, workers: int) -> int:
    rows = acceptance.run_all(cfg.seed, workers)
    with open(out.file("summary.csv"), "wb") as fh:
        fh.write(acceptance.summary_csv(rows))
    out.json("summary.json", {"seed": cfg.seed, "criteria": [
        {"id": r.id, "name": r.name, "observed": r.observed, "threshold": r.threshold,
         "pass": r.passed, "details": r.details} for r in rows]})
    for r in rows:
        print(r.line())
    return EXIT_OK if all(r.passed for r in rows) else EXIT_NUMERIC


COMMANDS = {
    "norm": cmd_norm, "potential": cmd_potential, "derivative": cmd_derivative,
    "maximal": cmd_maximal, "weights": cmd_weights, "kernels": cmd_kernels,
    "invert": cmd_invert, "hardy": cmd_hardy, "report-all": cmd_report_all,
}


def _workers(text: str) -> int:
    if text == "max":
        return acceptance.max_workers()
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("workers must be a positive integer or 'max'")
    if k < 1:
        raise argparse.ArgumentTypeError("workers must be a positive integer or 'max'")
    return k


def _seed(text: str) -> int:
    try:
        s = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    if not 0 <= s < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return s


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardylab",
                                 description="Numerical checks for fractional Hardy inequalities "
                                             "in variable-exponent spaces.")
    ap.add_argument("--version", action="version", version=f"hardylab {__version__}")
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (default: config 'out' or ./hardylab-out/<command>)")
    ap.add_argument("--seed", type=_seed, help="override the configuration seed")
    ap.add_argument("--workers", type=_workers, default=1, help="thread count or 'max'")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        raw_seed = args.seed
        cfg = load_config(args.config)
        if raw_seed is not None:
            cfg.seed = raw_seed
            cfg.resolved["seed"] = raw_seed
            if "seed" not in cfg.raw.get("family", {}):
                from .hardy import TestFamily
                cfg.family = TestFamily(cfg.family.kind, cfg.family.count, raw_seed)
                cfg.resolved["family"]["seed"] = raw_seed
    except ConfigError as exc:
        where = f" [field: {exc.field}]" if exc.field else ""
        print(f"hardylab: configuration error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = args.out or cfg.out or os.path.join("hardylab-out", args.command)
    try:
        out = Output(path, args.command, cfg, args.workers)
    except OSError as exc:
        print(f"hardylab: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        code = COMMANDS[args.command](cfg, out, args.workers)
    except Exception as exc:  # noqa: BLE001 - every failure is reported and exits 4
        msg = f"{type(exc).__name__}: {exc}"
        out.finish(msg)
        print(f"hardylab: {msg}", file=sys.stderr)
        return EXIT_RUNTIME
    out.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())
