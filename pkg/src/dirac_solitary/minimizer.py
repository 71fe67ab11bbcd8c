"""Outer problem: minimize E^(m)(w) = max over the fiber through w, for w on the unit sphere of X_+.

The direction ``w`` is carried as its FW block ``v`` (a unit two-spinor in
momentum space).  The descent is Riemannian on that sphere: project the
envelope gradient onto the tangent space, precondition, step, renormalize.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .coulomb import GAMMA_KATO, FINE_STRUCTURE, build_kernel, coulomb_bilinear
from .dirac import ModelKind, assemble_hat, build_spectral_data, split_hat
from .fiber import (
    FiberConfig,
    MaximizerError,
    MaximizerResult,
    Problem,
    ascend,
    phase_align,
    two_spinor_block,
)
from .functional import EnergyBreakdown, check_mass_parameter, evaluate, residual_hat
from .grid import Field, GridSpec, gaussian
from .reports import CheckReport


class SolveError(RuntimeError):
    """The outer loop failed; ``result`` carries the last iterate."""

    def __init__(self, message: str, result: SolveResult | None = None):
        super().__init__(message)
        self.result = result


class StaleMaximizerError(ValueError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    model: ModelKind = ModelKind.MAXWELL_DIRAC
    m: float = 1.0
    e2: float = FINE_STRUCTURE
    n: int = 64
    l: float = 60.0
    kernel: str = "truncated"
    tol_inner: float = 1e-9
    tol_outer: float = 1e-7
    tol_residual: float = 1e-6
    max_inner: int = 5000
    max_outer: int = 2000
    seed: int = 0
    sigma0: float = 8.0

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind.parse(self.model))
        check_mass_parameter(self.m)
        if self.e2 < 0:
            raise ValueError("e2 must be non-negative")
        for name in ("tol_inner", "tol_outer", "tol_residual", "sigma0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_inner <= 0 or self.max_outer <= 0:
            raise ValueError("iteration limits must be positive")
        GridSpec(self.n, self.l)
        if self.kernel not in ("truncated", "plain"):
            raise ValueError(f"unknown kernel variant {self.kernel!r}")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n, self.l)

    def fiber_config(self) -> FiberConfig:
        return FiberConfig(tol_inner=self.tol_inner, max_inner=self.max_inner)

    def problem(self) -> Problem:
        return Problem(self.m, self.model, build_kernel(self.grid, self.kernel), self.e2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.value
        return d


@dataclass
class SolveResult:
    psi: Field
    omega: float
    energy_e: float
    energy_E: float
    breakdown: EnergyBreakdown
    residual: float
    iterations: int
    inner_iterations: int
    converged: bool
    grad_norm: float
    config: SolveConfig
    fiber: MaximizerResult
    property_report: list[CheckReport] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    trace: list[tuple] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def excess(self) -> float:
        """e(m) - 1 without cancellation."""
        return self.breakdown.excess

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iter", "E", "grad_norm", "omega", "inner_iters"])
            for row in self.trace:
                wr.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]), row[4]])


# ------------------------------------------------------------------ gradient


def _dot(a, b, wp) -> float:
    return float(np.vdot(a, b).real * wp)


def envelope_gradient(res: MaximizerResult, wp: float) -> np.ndarray:
    """Tangent part of a (g_+ - a omega v) in FW-block coordinates."""
    a = res.point.a
    g = a * (res.grad_plus - a * res.omega * res.v)
    return g - res.v * _dot(res.v, g, wp)


def direction_gradient(w: Field, maximizer_result: MaximizerResult, m: float, model: ModelKind) -> Field:
    """Envelope gradient G_E of w -> E^(m)(w), tangent to the unit sphere at w."""
    model = ModelKind.parse(model)
    v = two_spinor_block(w, model)
    if maximizer_result.v is None or not np.allclose(v, maximizer_result.v, rtol=0, atol=1e-10):
        raise StaleMaximizerError("maximizer result was computed for a different w")
    if maximizer_result.breakdown.m != m or maximizer_result.breakdown.model is not model:
        raise StaleMaximizerError("maximizer result was computed for a different (m, model)")
    sd = build_spectral_data(w.grid)
    g = envelope_gradient(maximizer_result, w.grid.w_p)
    out = Field(assemble_hat(g, np.zeros_like(g), model, sd), w.grid, "momentum")
    return out.to(w.representation)


def initial_block(grid: GridSpec, sigma: float) -> np.ndarray:
    """Spin-up Gaussian two-spinor in momentum space, unit L2 norm."""
    v = np.zeros((2, *grid.shape), dtype=complex)
    v[0] = gaussian(grid, sigma)
    vh = Field(v, grid).to("momentum").values
    return vh / math.sqrt(_dot(vh, vh, grid.w_p))


def _precondition(g: np.ndarray, omega: float, grid: GridSpec) -> np.ndarray:
    # (lambda(p) - omega)^-1 is the kinetic part of the tangent Hessian; the shift keeps
    # it positive while omega is still above the continuum threshold
    sd = build_spectral_data(grid)
    shift = max(1.0 - omega, 0.0) + 1e-4
    return g / (sd.lam_minus_one + shift)


# ------------------------------------------------------------------ minimize


def _inner(v, prob, fcfg, zeta, tol):
    return ascend(v, prob, fcfg, zeta, tol=tol)


def minimize(
    cfg: SolveConfig,
    v0: np.ndarray | None = None,
    raise_on_failure: bool = True,
    callback=None,
) -> SolveResult:
    """Riemannian preconditioned descent of E^(m) with warm-started inner ascents."""
    t0 = time.perf_counter()
    prob = cfg.problem()
    grid = cfg.grid
    wp = grid.w_p
    fcfg = cfg.fiber_config()
    v = initial_block(grid, cfg.sigma0) if v0 is None else v0 / math.sqrt(_dot(v0, v0, wp))
    res = _inner(v, prob, fcfg, None, cfg.tol_inner)
    inner_total = res.iterations
    trace = []
    flags: list[str] = []
    it = 0
    converged = False
    step0 = 1.0
    while True:
        G = envelope_gradient(res, wp)
        gnorm = math.sqrt(_dot(G, G, wp))
        trace.append((it, res.breakdown.total, gnorm, res.omega, res.iterations))
        if callback is not None:
            callback(it, res, gnorm)
        if gnorm <= cfg.tol_outer:
            converged = True
            break
        if it >= cfg.max_outer:
            break
        d = -_precondition(G, res.omega, grid)
        d -= v * _dot(v, d, wp)
        slope = 2.0 * _dot(G, d, wp)
        tol_eff = min(cfg.tol_inner, 0.01 * gnorm)
        t = step0
        accepted = None
        for _ in range(40):
            trial = v + t * d
            trial /= math.sqrt(_dot(trial, trial, wp))
            try:
                cand = _inner(trial, prob, fcfg, res.zeta, tol_eff)
            except MaximizerError:
                t *= 0.5
                continue
            drop = cand.breakdown.excess - res.breakdown.excess
            if drop <= 1e-4 * t * slope:
                accepted = cand
                break
            noise = 64 * np.finfo(float).eps * (abs(res.breakdown.excess) + 1e-3)
            if drop <= noise and _dot(envelope_gradient(cand, wp), envelope_gradient(cand, wp), wp) < gnorm**2:
                accepted = cand
                if "roundoff_acceptance" not in flags:
                    flags.append("roundoff_acceptance")
                break
            inner_total += cand.iterations
            t *= 0.5
        it += 1
        if accepted is None:
            if gnorm <= 100 * cfg.tol_outer:
                flags.append("line_search_stalled_at_roundoff")
                converged = True
            else:
                flags.append("line_search_failed")
            break
        inner_total += accepted.iterations
        # grow the trial step again after easy acceptances
        step0 = min(1.0, 2.0 * t) if t >= step0 else t
        res = phase_align(accepted, grid)
        v = res.v

    # final inner solve at full tolerance so reported quantities are clean
    res = _inner(v, prob, fcfg, res.zeta, min(cfg.tol_inner, 1e-2 * cfg.tol_outer))
    inner_total += res.iterations
    result = _package(res, prob, cfg, it, inner_total, converged, trace, flags, time.perf_counter() - t0)
    if not converged and raise_on_failure:
        raise SolveError(f"outer loop stopped after {it} iterations with ||G_E|| = {result.grad_norm:.3e}", result)
    return result


def _package(res, prob, cfg, it, inner_total, converged, trace, flags, wall) -> SolveResult:
    grid = cfg.grid
    wp = grid.w_p
    ev = evaluate(res.point.psi.values, prob.m, prob.model, prob.kernel, prob.e2)
    omega = _dot(ev.grad_hat, res.point.psi.values, wp)
    resid = residual_hat(ev.grad_hat, res.point.psi.values, omega, grid)
    G = envelope_gradient(res, wp)
    gnorm = math.sqrt(_dot(G, G, wp))
    bd = res.breakdown
    result = SolveResult(
        psi=res.point.psi,
        omega=omega,
        energy_e=bd.total,
        energy_E=cfg.m * bd.total,
        breakdown=bd,
        residual=resid,
        iterations=it,
        inner_iterations=inner_total,
        converged=converged,
        grad_norm=gnorm,
        config=cfg,
        fiber=res,
        flags=list(flags),
        trace=trace,
        wall_time=wall,
    )
    result.property_report = solution_window(result)
    if converged and resid > cfg.tol_residual:
        result.flags.append("residual_above_tolerance")
    if not all(r.passed for r in result.property_report):
        result.flags.append("energy_window_violation")
    return result


def solution_window(result: SolveResult) -> list[CheckReport]:
    """omega in (0, 1) and (1 - m c gamma_K) <= e(m) < 1, written as excesses over 1."""
    cfg = result.config
    c = cfg.m * cfg.model.prefactor(cfg.e2) * GAMMA_KATO
    ex = result.excess
    free = cfg.e2 == 0
    return [
        CheckReport("omega_positive", 0.0, result.omega, slack=0.0, abs_slack=0.0, strict=True),
        CheckReport("omega_below_one", result.omega - 1.0, 0.0, slack=0.0, abs_slack=1e-12 if free else 0.0, strict=not free),
        CheckReport("energy_below_one", ex, 0.0, slack=0.0, abs_slack=1e-12 if free else 0.0, strict=not free),
        CheckReport("energy_lower_window", -c, ex, slack=0.0, abs_slack=1e-12),
        CheckReport("residual", result.residual, cfg.tol_residual, slack=0.0, abs_slack=0.0),
    ]


def fiber_energy(w: Field, cfg: SolveConfig, warm: MaximizerResult | None = None) -> MaximizerResult:
    """E^(m)(w) through a fresh inner solve (used by finite-difference checks)."""
    prob = cfg.problem()
    v = two_spinor_block(w, cfg.model)
    return ascend(v, prob, cfg.fiber_config(), None if warm is None else warm.zeta)


# --------------------------------------------------------------- trial bound


@dataclass(frozen=True)
class TrialRow:
    epsilon: float
    bound: float
    accepted: bool
    dominates_solution: bool | None


@dataclass(frozen=True)
class TrialBoundTable:
    K: float
    B: float
    sigma: float
    epsilon_star: float
    bound_star: float
    rows: list[TrialRow]

    @property
    def all_dominate(self) -> bool:
        return all(r.dominates_solution is not False for r in self.rows)


def trial_upper_bound(
    v: Field,
    m: float,
    e2: float,
    epsilons,
    model: ModelKind = ModelKind.MAXWELL_DIRAC,
    solution_e: float | None = None,
    slack: float = 1e-10,
) -> TrialBoundTable:
    """Upper bounds 1 + eps^2 K - eps m c B on e(m) from rescaled trial profiles v(eps x).

    ``K = ||grad v||^2`` and ``B = B(rho_v, rho_v)`` are evaluated once on the
    grid for the normalized ``v``; under ``v -> eps^(3/2) v(eps x)`` they scale as
    ``eps^2`` and ``eps``.  Values of eps for which the rescaled profile leaves the
    box (sigma / eps > l / 8, sigma the RMS radius over sqrt 3) are rejected.
    """
    check_mass_parameter(m)
    model = ModelKind.parse(model)
    if v.ncomp != 2:
        raise ValueError("trial profile must be a two-spinor")
    grid = v.grid
    nrm = v.norm()
    if nrm == 0:
        raise ValueError("trial profile is zero")
    vn = v * (1.0 / nrm)
    vh = vn.to("momentum").values
    p2 = grid.momentum_norm() ** 2
    K = float(np.sum(p2 * np.sum(vh.real**2 + vh.imag**2, axis=0)) * grid.w_p)
    rho = Field(np.sum(np.abs(vn.to("position").values) ** 2, axis=0), grid)
    kern = build_kernel(grid, "truncated")
    B = coulomb_bilinear(rho, rho, kern)
    r2 = float(np.sum(grid.radius() ** 2 * rho.values[0]) * grid.w_x)
    sigma = math.sqrt(r2 / 3.0)
    c = m * model.prefactor(e2)
    eps_star = c * B / (2.0 * K)
    bound_star = 1.0 - (c * B) ** 2 / (4.0 * K)
    rows = []
    for eps in epsilons:
        eps = float(eps)
        ok = eps > 0 and sigma / eps <= grid.l / 8
        b = 1.0 + eps**2 * K - eps * c * B
        dom = None
        if ok and solution_e is not None:
            dom = solution_e <= b + slack
        rows.append(TrialRow(eps, b, ok, dom))
    return TrialBoundTable(K, B, sigma, eps_star, bound_star, rows)


# --------------------------------------------------------------------- sweep


@dataclass
class SweepRow:
    m: float
    e_m: float
    E_m: float
    omega: float
    residual: float
    converged: bool
    excess: float = 0.0
    result: SolveResult | None = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    checks: list[CheckReport]
    partial: bool
    free_case: bool
    notes: list[str] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["m", "e_m", "E_m", "omega", "residual", "converged"])
            for r in self.rows:
                wr.writerow([repr(r.m), repr(r.e_m), repr(r.E_m), repr(r.omega), repr(r.residual), int(r.converged)])


def _solve_row(cfg: SolveConfig) -> SolveResult:
    return minimize(cfg, raise_on_failure=False)


def sweep(cfg: SolveConfig, m_values, workers: int = 1, keep_results: bool = True) -> SweepResult:
    """Independent solves over ``m_values`` plus the scaling and subadditivity checks on E(m)."""
    ms = sorted(float(x) for x in m_values)
    if len(ms) < 3:
        raise ValueError("a sweep needs at least three mass values")
    for x in ms:
        check_mass_parameter(x)
    cfgs = [replace(cfg, m=x) for x in ms]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_solve_row, cfgs))
    else:
        results = [_solve_row(c) for c in cfgs]
    rows = [
        SweepRow(x, r.energy_e, r.energy_E, r.omega, r.residual, r.converged, r.excess, r if keep_results else None)
        for x, r in zip(ms, results)
    ]
    good = [r for r in rows if r.converged]
    free = cfg.e2 == 0
    checks: list[CheckReport] = []
    notes: list[str] = []
    # E(m)/m - 1 = e(m) - 1 = excess, so compare excesses to keep precision
    for lo, hi in zip(good, good[1:]):
        checks.append(
            CheckReport(
                f"E/m decreasing {lo.m:g}->{hi.m:g}", hi.excess, lo.excess, slack=0.0,
                abs_slack=1e-10 if free else 0.0, strict=not free,
            )
        )
    by_m = {round(r.m, 12): r for r in good}
    for r in good:
        for r1 in good:
            m2 = round(r.m - r1.m, 12)
            if r1.m <= m2 and m2 in by_m:
                r2 = by_m[m2]
                # E(m) - m versus (E(m1) - m1) + (E(m2) - m2)
                lhs = r.m * r.excess
                rhs = r1.m * r1.excess + r2.m * r2.excess
                checks.append(
                    CheckReport(
                        f"subadditive {r.m:g}<{r1.m:g}+{r2.m:g}", lhs, rhs, slack=0.0,
                        abs_slack=1e-10 if free else 0.0, strict=not free,
                    )
                )
    if free:
        notes.append("non-strict (free case): E(m) = m, subadditivity holds with equality")
        for r in good:
            checks.append(CheckReport(f"free E(m)=m at {r.m:g}", abs(r.E_m - r.m), 0.0, slack=0.0, abs_slack=1e-10))
    partial = len(good) < len(rows)
    if partial:
        notes.append(f"partial sweep: {len(rows) - len(good)} unconverged rows skipped in checks")
    return SweepResult(rows, checks, partial, free, notes)


# ------------------------------------------------------ critical-point check


def _phase_distance(a: np.ndarray, b: np.ndarray, wp: float) -> float:
    na = _dot(a, a, wp)
    nb = _dot(b, b, wp)
    ov = abs(np.vdot(a, b)) * wp
    return math.sqrt(max(na + nb - 2 * ov, 0.0))


def check_critical_point_characterization(
    psi: Field, m: float, model: ModelKind, e2: float, kernel_variant: str = "truncated", fiber_cfg: FiberConfig = FiberConfig()
) -> list[CheckReport]:
    """Re-maximize on the fiber through psi_+/||psi_+|| and compare with psi.

    Also checks ||psi_-||^2_{H^1/2} <= 2 m kappa gamma_K ||psi_+||^2_{H^1/2}.
    """
    model = ModelKind.parse(model)
    grid = psi.grid
    wp = grid.w_p
    sd = build_spectral_data(grid)
    kern = build_kernel(grid, kernel_variant)
    prob = Problem(m, model, kern, e2)
    ph = psi.to("momentum").values
    nrm2 = _dot(ph, ph, wp)
    ph = ph / math.sqrt(nrm2)
    plus, minus = split_hat(ph, model, sd)
    pn = math.sqrt(_dot(plus, plus, wp))
    if pn == 0:
        raise ValueError("psi has no positive part")
    v = plus / pn
    own = evaluate(ph, m, model, kern, e2, gradient=False).breakdown
    out: list[CheckReport] = []
    try:
        res = ascend(v, prob, fiber_cfg)
    except MaximizerError as exc:
        return [CheckReport("fiber_reproduction", math.inf, 0.0, provenance=str(exc))]
    out.append(
        CheckReport("fiber_reproduces_psi", _phase_distance(res.point.psi.values, ph, wp), 0.0, slack=0.0, abs_slack=1e-5)
    )
    out.append(CheckReport("fiber_value_matches", abs(res.breakdown.excess - own.excess), 0.0, slack=0.0, abs_slack=1e-8))
    hp = float(np.sum(sd.lam * np.sum(np.abs(plus) ** 2, axis=0)) * wp)
    hm = float(np.sum(sd.lam * np.sum(np.abs(minus) ** 2, axis=0)) * wp)
    kappa = m * model.effective_coupling(e2)
    out.append(CheckReport("minus_kinetic_vs_plus", hm, 2 * kappa * GAMMA_KATO * hp, slack=0.0, abs_slack=1e-12))
    return out
