"""Command-line driver: solve, sweep, verify, export, selftest.

Exit codes: 0 success, 1 configuration error, 2 non-convergence,
3 failed check, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import difflib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .coulomb import FINE_STRUCTURE, build_kernel, current_array, density_array
from .grid import load_field, save_field
from .minimizer import SolveConfig, SolveResult, check_critical_point_characterization, minimize, sweep
from .reports import CheckReport

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_CHECK, EXIT_IO = 0, 1, 2, 3, 4
MANIFEST_VERSION = 1

DEFAULTS = {
    "model": "md",
    "m": 1.0,
    "e2": FINE_STRUCTURE,
    "grid": {"n": 64, "l": 60.0},
    "kernel": "truncated",
    "tol": {"inner": 1e-9, "outer": 1e-7, "residual": 1e-6},
    "max": {"inner": 5000, "outer": 2000},
    "seed": 0,
    "init": {"sigma": 8.0},
}
CHOICES = {"model": ("md", "cd"), "kernel": ("truncated", "plain")}


class ConfigError(ValueError):
    pass


def _merge(raw: dict, defaults: dict, path: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    out = {}
    for key in raw:
        if key not in defaults:
            hint = difflib.get_close_matches(key, list(defaults), n=1)
            msg = f"{path}{key}: unknown key"
            raise ConfigError(msg + (f" (did you mean {hint[0]!r}?)" if hint else ""))
    for key, dv in defaults.items():
        val = raw.get(key, dv)
        if isinstance(dv, dict):
            out[key] = _merge(val, dv, f"{path}{key}.")
        else:
            out[key] = val
    return out


def config_from_dict(raw: dict) -> SolveConfig:
    d = _merge(raw, DEFAULTS, "")
    for key, allowed in CHOICES.items():
        val = d[key]
        if val not in allowed:
            hint = difflib.get_close_matches(str(val), allowed, n=1)
            raise ConfigError(
                f"{key}: {val!r} is not one of {allowed}" + (f" (did you mean {hint[0]!r}?)" if hint else "")
            )
    def num(path, val, kind=float):
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {val!r}")
        if kind is int and float(val) != int(val):
            raise ConfigError(f"{path}: expected an integer, got {val!r}")
        return kind(val)

    m = num("m", d["m"])
    if not 0 < m <= 1:
        raise ConfigError(f"m: {m} violates m ∈ (0,1]")
    try:
        return SolveConfig(
            model=d["model"],
            m=m,
            e2=num("e2", d["e2"]),
            n=num("grid.n", d["grid"]["n"], int),
            l=num("grid.l", d["grid"]["l"]),
            kernel=d["kernel"],
            tol_inner=num("tol.inner", d["tol"]["inner"]),
            tol_outer=num("tol.outer", d["tol"]["outer"]),
            tol_residual=num("tol.residual", d["tol"]["residual"]),
            max_inner=num("max.inner", d["max"]["inner"], int),
            max_outer=num("max.outer", d["max"]["outer"], int),
            seed=num("seed", d["seed"], int),
            sigma0=num("init.sigma", d["init"]["sigma"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_to_dict(cfg: SolveConfig) -> dict:
    return {
        "model": cfg.model.value,
        "m": cfg.m,
        "e2": cfg.e2,
        "grid": {"n": cfg.n, "l": cfg.l},
        "kernel": cfg.kernel,
        "tol": {"inner": cfg.tol_inner, "outer": cfg.tol_outer, "residual": cfg.tol_residual},
        "max": {"inner": cfg.max_inner, "outer": cfg.max_outer},
        "seed": cfg.seed,
        "init": {"sigma": cfg.sigma0},
    }


def load_config(path) -> SolveConfig:
    """Read a JSON config; missing keys take defaults, unknown keys are rejected."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(raw)


# ---------------------------------------------------------------- manifests


def _summary(reports: list[CheckReport]) -> dict:
    failed = [r.name for r in reports if not r.passed]
    return {"total": len(reports), "passed": len(reports) - len(failed), "failed": failed}


def manifest(result: SolveResult, files: dict, checks: list[CheckReport] | None = None) -> dict:
    cfg = result.config
    reports = list(result.property_report) + list(checks or [])
    return {
        "format_version": MANIFEST_VERSION,
        "package_version": __version__,
        "config": config_to_dict(cfg),
        "model": cfg.model.value,
        "m": cfg.m,
        "e2": cfg.e2,
        "grid": {"n": cfg.n, "l": cfg.l},
        "E": result.energy_E,
        "e": result.energy_e,
        "e_minus_one": result.excess,
        "omega": result.omega,
        "residual": result.residual,
        "grad_norm": result.grad_norm,
        "converged": result.converged,
        "iterations": {"outer": result.iterations, "inner_total": result.inner_iterations},
        "wall_time": result.wall_time,
        "flags": result.flags,
        "checks": _summary(reports),
        "files": files,
    }


def _write_solve(result: SolveResult, out: Path, checks=None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    save_field(out / "psi.dsol", result.psi.to("position"))
    result.write_trace(out / "trace.csv")
    man = manifest(result, {"psi": "psi.dsol", "trace": "trace.csv"}, checks)
    (out / "manifest.json").write_text(json.dumps(man, indent=2))
    return man


# ----------------------------------------------------------------- commands


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    result = minimize(cfg, raise_on_failure=False)
    checks = None
    if args.check and result.converged:
        from .verify import check_solution

        checks = check_solution(result, num_probes=args.probes)
        checks += check_critical_point_characterization(result.psi, cfg.m, cfg.model, cfg.e2, cfg.kernel)
    man = _write_solve(result, Path(args.out), checks)
    print(f"E = {man['E']:.15g}  omega = {man['omega']:.15g}  residual = {man['residual']:.3e}  converged = {man['converged']}")
    if not result.converged:
        return EXIT_NONCONVERGED
    if man["checks"]["failed"]:
        print("failed checks: " + ", ".join(man["checks"]["failed"]), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    try:
        masses = [float(x) for x in args.masses.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--masses: cannot parse {args.masses!r}") from None
    try:
        sw = sweep(cfg, masses, workers=args.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sw.write_csv(out / "sweep.csv")
    for row in sw.rows:
        _write_solve(row.result, out / f"m_{row.m:g}")
    (out / "sweep_checks.json").write_text(json.dumps({"checks": [c.to_dict() for c in sw.checks], "notes": sw.notes}, indent=2))
    for note in sw.notes:
        print(note)
    for c in sw.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.lhs:.6e} vs {c.rhs:.6e}")
    if sw.partial:
        return EXIT_NONCONVERGED
    return EXIT_OK if all(c.passed for c in sw.checks) else EXIT_CHECK


def _field_checks(args) -> list[CheckReport]:
    from .functional import omega_estimate
    from .verify import DelocalizedError, check_interaction_bounds, explicit_residual

    psi = load_field(args.field)
    cfg = load_config(args.config) if args.config else SolveConfig(n=psi.grid.n, l=psi.grid.l)
    if psi.grid != cfg.grid:
        raise ConfigError(f"field grid {psi.grid} does not match config grid {cfg.grid}")
    kernel = build_kernel(cfg.grid, cfg.kernel)
    reports: list[CheckReport] = []
    try:
        reports += check_interaction_bounds(psi, kernel, provenance=str(args.field))
    except DelocalizedError as exc:
        print(f"note: interaction bounds skipped ({exc})")
    om = omega_estimate(psi, cfg.m, cfg.model, kernel, cfg.e2).omega
    res = explicit_residual(psi, om, cfg.m, cfg.model, kernel, cfg.e2)
    reports.append(CheckReport("explicit_potential_residual", res, cfg.tol_residual, slack=0.0, abs_slack=0.0, provenance=str(args.field)))
    reports += check_critical_point_characterization(psi, cfg.m, cfg.model, cfg.e2, cfg.kernel)
    return reports


def cmd_verify(args) -> int:
    from .verify import inequality_suite, write_reports

    if args.field:
        reports = _field_checks(args)
    else:
        reports = inequality_suite(range(args.seeds))
    write_reports(args.out, reports)
    bad = [r for r in reports if not r.passed]
    print(f"{len(reports) - len(bad)}/{len(reports)} checks passed")
    for r in bad[:20]:
        print(f"FAIL {r.name} [{r.provenance}]: {r.lhs:.6e} > {r.rhs:.6e}", file=sys.stderr)
    return EXIT_CHECK if bad else EXIT_OK


def cmd_export(args) -> int:
    from .coulomb import coulomb_potential
    from .grid import Field

    psi = load_field(args.field).to("position")
    grid = psi.grid
    e2 = args.e2
    man = Path(args.field).with_name("manifest.json")
    if e2 is None and man.exists():
        e2 = json.loads(man.read_text())["e2"]
    e2 = FINE_STRUCTURE if e2 is None else e2
    x = psi.values
    rho = density_array(x)
    jmag = np.sqrt(np.sum(current_array(x) ** 2, axis=0))
    a0 = -math.sqrt(e2) * coulomb_potential(Field(rho, grid), build_kernel(grid, args.kernel)).values[0]
    k = grid.n // 2  # z = 0 plane
    ax = grid.axis()
    with open(args.out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "rho", "A0", "J_abs"])
        for i in range(grid.n):
            for j in range(grid.n):
                wr.writerow([repr(ax[i]), repr(ax[j]), repr(rho[i, j, k]), repr(a0[i, j, k]), repr(jmag[i, j, k])])
    print(f"wrote {grid.n * grid.n} rows to {args.out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    reports = run_selftest()
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.lhs:.3e} <= {r.rhs:.3e}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirac-solitary", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute one solitary wave")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--check", action="store_true", help="run the post-solve check set")
    s.add_argument("--probes", type=int, default=20, help="concavity probes for --check")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", help="solve over several values of m")
    s.add_argument("--config", required=True)
    s.add_argument("--masses", required=True, help="comma separated, e.g. 0.25,0.5,1.0")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("verify", help="inequality suite, or checks on a stored field")
    s.add_argument("--seeds", type=int, default=100)
    s.add_argument("--field", help="DSOL1 spinor to check instead of random fields")
    s.add_argument("--config", help="config describing the field's problem")
    s.add_argument("--out", default="checks.json")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("export", help="z = 0 slice of a stored spinor as CSV")
    s.add_argument("--field", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--e2", type=float, default=None)
    s.add_argument("--kernel", default="truncated", choices=CHOICES["kernel"])
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("selftest", help="fast sanity suite")
    s.set_defaults(func=cmd_selftest)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # malformed snapshots surface as ValueError from the loader
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if "DSOL1" in str(exc) or "payload" in str(exc) else EXIT_CONFIG
    if args.command in ("solve", "sweep"):
        print(f"elapsed {time.perf_counter() - t0:.1f}s")
    return code


def main() -> None:
    sys.exit(run())

