"""Inner problem: maximize I^(m) over the fiber X_W = {a(eta) w + eta : eta in X_-}.

Internally a fiber point is stored in Foldy-Wouthuysen coordinates: ``v`` is
the two-spinor block carrying the direction ``w`` and ``zeta`` the block
carrying ``eta``, both in momentum space.  In those coordinates the spectral
projections are block selections and cost nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .coulomb import GAMMA_KATO, InteractionKernel
from .dirac import ModelKind, assemble_hat, build_spectral_data, split_hat
from .functional import EnergyBreakdown, check_mass_parameter, evaluate
from .grid import Field, fft_inverse, random_localized_field
from .reports import CheckReport


class MaximizerError(RuntimeError):
    """Inner ascent did not converge; ``state`` holds the last iterate."""

    def __init__(self, message: str, state: MaximizerResult | None = None):
        super().__init__(message)
        self.state = state


class TrustRegionError(MaximizerError):
    """||eta||^2 reached the cap; the ascent is diverging out of the fiber."""


@dataclass(frozen=True)
class FiberConfig:
    tol_inner: float = 1e-9
    max_inner: int = 5000
    precondition: bool = True
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 40
    eta_cap: float = 1.0 - 1e-6
    check_slack: float = 1e-8

    def __post_init__(self):
        if self.tol_inner <= 0 or self.max_inner <= 0:
            raise ValueError("tol_inner and max_inner must be positive")


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything that stays fixed while w varies."""

    m: float
    model: ModelKind
    kernel: InteractionKernel
    e2: float

    def __post_init__(self):
        check_mass_parameter(self.m)
        if self.e2 < 0:
            raise ValueError("e2 must be non-negative")

    @property
    def grid(self):
        return self.kernel.grid

    @property
    def kappa(self) -> float:
        """m times the coupling that enters the a-priori bounds (m e^2 for Maxwell-Dirac)."""
        return self.m * self.model.effective_coupling(self.e2)


@dataclass(frozen=True)
class FiberPoint:
    w: Field
    eta: Field
    a: float
    psi: Field


@dataclass
class MaximizerResult:
    point: FiberPoint
    omega: float
    breakdown: EnergyBreakdown
    iterations: int
    converged: bool
    grad_norm: float
    property_report: list[CheckReport] = field(default_factory=list)
    # FW-block state, reused for warm starts and by the outer solver
    v: np.ndarray | None = None
    zeta: np.ndarray | None = None
    grad_plus: np.ndarray | None = None
    roundoff_stop: bool = False

    @property
    def value(self) -> float:
        return self.breakdown.total

    @property
    def excess(self) -> float:
        return self.breakdown.excess


# ------------------------------------------------------------------ internals


def _wp_dot(a: np.ndarray, b: np.ndarray, w_p: float) -> float:
    """Re <a|b> for momentum arrays."""
    return float(np.vdot(a, b).real * w_p)


@dataclass
class _FiberEval:
    zeta: np.ndarray
    a: float
    excess: float
    breakdown: EnergyBreakdown
    grad_plus: np.ndarray
    grad_minus: np.ndarray
    g_fiber: np.ndarray
    omega: float
    psi_hat: np.ndarray
    r_over_a: float


def _fiber_eval(v: np.ndarray, zeta: np.ndarray, prob: Problem) -> _FiberEval:
    grid = prob.grid
    sd = build_spectral_data(grid)
    wp = grid.w_p
    z2 = _wp_dot(zeta, zeta, wp)
    a = math.sqrt(max(1.0 - z2, 0.0))
    psi_hat = assemble_hat(a * v, zeta, prob.model, sd)
    ev = evaluate(psi_hat, prob.m, prob.model, prob.kernel, prob.e2)
    gp, gm = split_hat(ev.grad_hat, prob.model, sd)
    r = _wp_dot(v, gp, wp)  # Re <g|w>
    g_fiber = gm - (r / a) * zeta
    # omega = Re <g|psi> = a Re<g|w> + Re<g_-|eta>
    omega = a * r + _wp_dot(zeta, gm, wp)
    return _FiberEval(zeta, a, ev.breakdown.excess, ev.breakdown, gp, gm, g_fiber, omega, psi_hat, r / a)


def _precondition(g: np.ndarray, ev: _FiberEval, prob: Problem, cfg: FiberConfig) -> np.ndarray:
    if not cfg.precondition:
        return g
    sd = build_spectral_data(prob.grid)
    # curvature of F along zeta: lambda(p) from the kinetic term plus Re<g|w>/a from a(eta)
    return g / (sd.lam + max(ev.r_over_a, 0.0))


def _roundoff_noise(excess: float) -> float:
    return 64 * np.finfo(float).eps * (abs(excess) + 1e-3)


def _fields_from(v: np.ndarray, ev: _FiberEval, prob: Problem) -> FiberPoint:
    sd = build_spectral_data(prob.grid)
    zero = np.zeros_like(v)
    w_hat = assemble_hat(v, zero, prob.model, sd)
    eta_hat = assemble_hat(zero, ev.zeta, prob.model, sd)
    g = prob.grid
    return FiberPoint(
        Field(w_hat, g, "momentum"),
        Field(eta_hat, g, "momentum"),
        ev.a,
        Field(ev.psi_hat, g, "momentum"),
    )


def ascend(
    v: np.ndarray,
    prob: Problem,
    cfg: FiberConfig = FiberConfig(),
    zeta0: np.ndarray | None = None,
    tol: float | None = None,
) -> MaximizerResult:
    """Preconditioned Armijo ascent on eta for a unit FW block ``v``."""
    tol = cfg.tol_inner if tol is None else tol
    wp = prob.grid.w_p
    zeta = np.zeros_like(v) if zeta0 is None else np.array(zeta0, dtype=complex)
    if _wp_dot(zeta, zeta, wp) >= cfg.eta_cap:
        raise TrustRegionError("initial eta violates the trust-region cap")
    ev = _fiber_eval(v, zeta, prob)
    it = 0
    roundoff = False
    while True:
        gnorm = math.sqrt(_wp_dot(ev.g_fiber, ev.g_fiber, wp))
        if gnorm <= tol or it >= cfg.max_inner:
            break
        d = _precondition(ev.g_fiber, ev, prob, cfg)
        slope = 2.0 * _wp_dot(ev.g_fiber, d, wp)
        t = cfg.initial_step
        accepted = None
        capped = False
        for _ in range(cfg.max_backtracks):
            trial = ev.zeta + t * d
            if _wp_dot(trial, trial, wp) >= cfg.eta_cap:
                capped = True
                t *= cfg.armijo_shrink
                continue
            cand = _fiber_eval(v, trial, prob)
            gain = cand.excess - ev.excess
            if gain >= cfg.armijo_c1 * t * slope:
                accepted = cand
                break
            # near the optimum the gain drops below roundoff; accept if the
            # gradient still shrinks and the loss is pure noise
            if gain >= -_roundoff_noise(ev.excess) and _wp_dot(cand.g_fiber, cand.g_fiber, wp) < gnorm**2:
                accepted = cand
                roundoff = True
                break
            t *= cfg.armijo_shrink
        it += 1
        if accepted is None:
            if capped:
                state = _finish(v, ev, prob, cfg, it, False, gnorm, roundoff)
                raise TrustRegionError(f"||eta||^2 reached the cap {cfg.eta_cap} at iteration {it}", state)
            # line search exhausted: treat as converged only at roundoff level
            roundoff = True
            break
        ev = accepted
    gnorm = math.sqrt(_wp_dot(ev.g_fiber, ev.g_fiber, wp))
    converged = gnorm <= tol or (roundoff and gnorm <= 1e3 * tol)
    res = _finish(v, ev, prob, cfg, it, converged, gnorm, roundoff)
    if not converged:
        raise MaximizerError(
            f"fiber ascent stopped after {it} iterations with ||G_F|| = {gnorm:.3e} > {tol:.1e}", res
        )
    return res


def _finish(v, ev: _FiberEval, prob: Problem, cfg: FiberConfig, it, converged, gnorm, roundoff) -> MaximizerResult:
    res = MaximizerResult(
        point=_fields_from(v, ev, prob),
        omega=ev.omega,
        breakdown=ev.breakdown,
        iterations=it,
        converged=converged,
        grad_norm=gnorm,
        v=v,
        zeta=ev.zeta,
        grad_plus=ev.grad_plus,
        roundoff_stop=roundoff,
    )
    res.property_report = property_report(res, prob, cfg.check_slack)
    return res


def property_report(res: MaximizerResult, prob: Problem, slack: float = 1e-8) -> list[CheckReport]:
    """Certified bounds on the fiber maximizer and the window for its value."""
    sd = build_spectral_data(prob.grid)
    wp = prob.grid.w_p
    v, zeta = res.v, res.zeta
    w_h = float(np.sum(sd.lam * (v.real**2 + v.imag**2)) * wp)
    w_h_excess = float(np.sum(sd.lam_minus_one * (v.real**2 + v.imag**2)) * wp)
    bd = res.breakdown
    a2 = res.point.a**2
    z2 = _wp_dot(zeta, zeta, wp)
    c = prob.m * prob.model.prefactor(prob.e2) * GAMMA_KATO
    lam_w = bd.total
    common = dict(slack=0.0, abs_slack=slack)
    return [
        CheckReport("omega_positive", 0.0, res.omega, strict=True, **common),
        CheckReport("omega_below_fiber_value", res.omega, lam_w, **common),
        CheckReport("minus_mass_below_plus_mass", z2, a2, strict=True, **common),
        CheckReport("kinetic_difference_at_least_one", 1.0, bd.kinetic_plus - bd.kinetic_minus, **common),
        CheckReport("minus_kinetic_bound", bd.kinetic_minus, c * w_h, **common),
        # value window, written as excesses over 1 so both sides keep full precision
        CheckReport("fiber_value_upper", bd.excess, w_h_excess, **common),
        CheckReport("fiber_value_lower", w_h_excess - c * w_h, bd.excess, **common),
    ]


# --------------------------------------------------------------- public API


def two_spinor_block(w: Field, model: ModelKind) -> np.ndarray:
    """FW block of a positive-subspace spinor, checking that the other block vanishes."""
    if w.ncomp != 4:
        raise ValueError(f"expected a 4-component spinor, got {w.ncomp}")
    sd = build_spectral_data(w.grid)
    plus, minus = split_hat(w.to("momentum").values, model, sd)
    wp = w.grid.w_p
    n2 = _wp_dot(plus, plus, wp)
    if _wp_dot(minus, minus, wp) > 1e-16 * max(n2, 1.0):
        raise ValueError("w is not in the positive spectral subspace")
    if not abs(n2 - 1.0) <= 1e-8:
        raise ValueError(f"w must have unit L2 norm, got ||w||^2 = {n2:.12g}")
    return plus / math.sqrt(n2)


def minus_block(eta: Field, model: ModelKind) -> np.ndarray:
    sd = build_spectral_data(eta.grid)
    return split_hat(eta.to("momentum").values, model, sd)[1]


def maximize(
    w: Field,
    m: float,
    model: ModelKind,
    kernel: InteractionKernel,
    e2: float,
    cfg: FiberConfig = FiberConfig(),
    warm_start: MaximizerResult | Field | None = None,
) -> MaximizerResult:
    """Maximizer of I^(m) on the fiber through ``w`` (unit norm, positive subspace)."""
    model = ModelKind.parse(model)
    prob = Problem(m, model, kernel, e2)
    v = two_spinor_block(w, model)
    zeta0 = None
    if isinstance(warm_start, MaximizerResult):
        zeta0 = warm_start.zeta
    elif isinstance(warm_start, Field):
        zeta0 = minus_block(warm_start, model)
    return ascend(v, prob, cfg, zeta0)


def random_tangent_minus(grid, model: ModelKind, rng: np.random.Generator, width: float = 4.0, scale: float = 1.0):
    """Random localized minus-block array (momentum space) with L2 norm ``scale``."""
    f = random_localized_field(grid, 2, rng, width)
    z = f.to("momentum").values
    return z * (scale / math.sqrt(_wp_dot(z, z, grid.w_p)))


def certify_concavity(
    result: MaximizerResult,
    m: float,
    model: ModelKind,
    kernel: InteractionKernel,
    e2: float,
    num_probes: int = 100,
    seed: int = 0,
    slack: float = 1e-8,
) -> list[CheckReport]:
    """Probe d^2I[h;h] - 2 omega ||h||^2 <= -2(1 - 6 kappa gamma_K) ||h||^2_{H^1/2} on tangent directions.

    ``h = da(eta)[xi] w + xi`` with ``xi`` a random minus-subspace field.
    """
    from .functional import hessian_form

    if not result.converged:
        raise ValueError("concavity certificate needs a converged maximizer")
    model = ModelKind.parse(model)
    grid = kernel.grid
    sd = build_spectral_data(grid)
    wp = grid.w_p
    kappa = m * model.effective_coupling(e2)
    const = 2.0 * (1.0 - 6.0 * kappa * GAMMA_KATO)
    rng = np.random.default_rng(seed)
    psi = result.point.psi
    a = result.point.a
    out = []
    for i in range(num_probes):
        xi = random_tangent_minus(grid, model, rng, width=rng.uniform(2.0, 6.0))
        da = -_wp_dot(result.zeta, xi, wp) / a
        h_hat = assemble_hat(da * result.v, xi, model, sd)
        h = Field(h_hat, grid, "momentum")
        d2 = hessian_form(psi, h, h, m, model, kernel, e2)
        h2 = _wp_dot(h_hat, h_hat, wp)
        hh = float(np.sum(sd.lam * np.sum(h_hat.real**2 + h_hat.imag**2, axis=0)) * wp)
        out.append(
            CheckReport("concavity", d2 - 2 * result.omega * h2, -const * hh, slack=0.0, abs_slack=slack, provenance=f"probe {i}")
        )
    return out


def uniqueness_probe(
    result: MaximizerResult,
    m: float,
    model: ModelKind,
    kernel: InteractionKernel,
    e2: float,
    starts: int = 5,
    radius: float = 0.3,
    seed: int = 0,
    cfg: FiberConfig = FiberConfig(),
) -> list[CheckReport]:
    """Restart the ascent from random eta with ||eta|| <= radius and compare value and spinor."""
    model = ModelKind.parse(model)
    prob = Problem(m, model, kernel, e2)
    rng = np.random.default_rng(seed)
    wp = kernel.grid.w_p
    out = []
    for i in range(starts):
        z0 = random_tangent_minus(kernel.grid, model, rng, scale=radius * rng.uniform(0.2, 1.0))
        other = ascend(result.v, prob, cfg, z0)
        dv = abs(other.breakdown.excess - result.breakdown.excess)
        diff = other.point.psi.values - result.point.psi.values
        dpsi = math.sqrt(_wp_dot(diff, diff, wp))
        out.append(CheckReport("multistart_value", dv, 0.0, slack=0.0, abs_slack=1e-8, provenance=f"start {i}"))
        out.append(CheckReport("multistart_spinor", dpsi, 0.0, slack=0.0, abs_slack=1e-5, provenance=f"start {i}"))
    return out


def alignment_phase(v: np.ndarray, grid) -> complex:
    """Unit phase making the dominant component of the FW block ``v`` real positive where |v|^2 peaks."""
    vx = fft_inverse(v, grid)
    dens = np.sum(vx.real**2 + vx.imag**2, axis=0)
    idx = np.unravel_index(int(np.argmax(dens)), dens.shape)
    comps = vx[(slice(None), *idx)]
    z = comps[int(np.argmax(np.abs(comps)))]
    return 1.0 + 0j if abs(z) == 0 else complex(np.conj(z) / abs(z))


def rotate_result(res: MaximizerResult, phase: complex) -> MaximizerResult:
    """The same maximizer multiplied by a global phase (every scalar is unchanged)."""
    p = res.point
    point = FiberPoint(p.w * phase, p.eta * phase, p.a, p.psi * phase)
    return replace(res, point=point, v=res.v * phase, zeta=res.zeta * phase, grad_plus=res.grad_plus * phase)


def phase_align(res: MaximizerResult, grid) -> MaximizerResult:
    return rotate_result(res, alignment_phase(res.v, grid))


__all__ = [
    "FiberConfig",
    "FiberPoint",
    "MaximizerError",
    "MaximizerResult",
    "Problem",
    "TrustRegionError",
    "ascend",
    "certify_concavity",
    "maximize",
    "phase_align",
    "rotate_result",
    "property_report",
    "uniqueness_probe",
]
