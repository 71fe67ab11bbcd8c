"""Numerical falsification harness for the inequalities behind the variational scheme.

Every check returns :class:`CheckReport` records and never mutates its inputs.
Continuum constants are used unchanged on the grid; the default slack is 1%
relative plus 1e-10 absolute.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .coulomb import (
    GAMMA_KATO,
    HARDY_CONSTANT,
    InteractionKernel,
    build_kernel,
    current_array,
    density_array,
)
from .dirac import ModelKind, assemble_hat, build_spectral_data, embed_two_spinor, h_hat
from .fiber import Problem, certify_concavity, random_tangent_minus
from .functional import evaluate, residual_hat
from .grid import Field, GridSpec, fft_forward, fft_inverse, gaussian, random_localized_field
from .reports import CheckReport

SLACK = 0.01
ABS_SLACK = 1e-10

# averages of 1/r and 1/r^2 over the unit cube centred at the origin; used at the
# node x = 0 where the point value is infinite
_CUBE_MEAN_INV_R = 2.380077363979553
_CUBE_MEAN_INV_R2 = 7.674124222443731


class DelocalizedError(ValueError):
    """Input has too much mass outside radius l/4 for the continuum checks."""


def _weights(grid: GridSpec, power: int) -> np.ndarray:
    r = grid.radius()
    safe = np.where(r > 0, r, 1.0)
    w = safe**-power
    centre = (_CUBE_MEAN_INV_R / grid.h) if power == 1 else (_CUBE_MEAN_INV_R2 / grid.h**2)
    return np.where(r > 0, w, centre)


def require_localized(f: Field, tol: float = 1e-8) -> None:
    x = f.to("position").values
    dens = np.sum(x.real**2 + x.imag**2, axis=0)
    total = dens.sum()
    if total == 0:
        return
    outside = dens[f.grid.radius() > f.grid.l / 4].sum() / total
    if outside > tol:
        raise DelocalizedError(f"mass fraction {outside:.2e} outside radius l/4 exceeds {tol:.0e}")


def _rep(name, lhs, rhs, provenance="", slack=SLACK, abs_slack=ABS_SLACK) -> CheckReport:
    return CheckReport(name, float(lhs), float(rhs), slack, abs_slack, provenance=provenance)


def _mom_sum(f_hat: np.ndarray, weight: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(weight * np.sum(f_hat.real**2 + f_hat.imag**2, axis=0)) * grid.w_p)


# ----------------------------------------------------------------- Kato/Hardy


def check_kato(f: Field, provenance: str = "") -> CheckReport:
    """||x|^-1/2 f||^2 <= (pi/2) ||(-Lap)^1/4 f||^2."""
    require_localized(f)
    grid = f.grid
    x = f.to("position").values
    lhs = float(np.sum(_weights(grid, 1) * np.sum(x.real**2 + x.imag**2, axis=0)) * grid.w_x)
    rhs = GAMMA_KATO * _mom_sum(f.to("momentum").values, grid.momentum_norm(), grid)
    return _rep("kato", lhs, rhs, provenance)


def check_hardy(f: Field, provenance: str = "") -> CheckReport:
    """||x|^-1 f||^2 <= 4 ||grad f||^2."""
    require_localized(f)
    grid = f.grid
    x = f.to("position").values
    lhs = float(np.sum(_weights(grid, 2) * np.sum(x.real**2 + x.imag**2, axis=0)) * grid.w_x)
    rhs = HARDY_CONSTANT * _mom_sum(f.to("momentum").values, grid.momentum_norm() ** 2, grid)
    return _rep("hardy", lhs, rhs, provenance)


# --------------------------------------------------------- interaction bounds


def check_interaction_bounds(psi: Field, kernel: InteractionKernel | None = None, provenance: str = "") -> list[CheckReport]:
    """Kato bound on the direct term, positivity of the current term and of Q_MD, and |J| <= rho."""
    require_localized(psi)
    grid = psi.grid
    kernel = kernel or build_kernel(grid)
    x = psi.to("position").values
    rho = density_array(x)
    J = current_array(x)
    pots = kernel.convolve(np.concatenate([rho[None], J]))
    b_rho = float(np.sum(pots[0] * rho) * grid.w_x)
    b_j = float(np.sum(pots[1:] * J) * grid.w_x)
    mass = float(rho.sum() * grid.w_x)
    quarter = _mom_sum(psi.to("momentum").values, grid.momentum_norm(), grid)
    jmag = np.sqrt(np.sum(J**2, axis=0))
    scale = max(float(rho.max()), 1e-300)
    return [
        _rep("direct_term_kato", b_rho, GAMMA_KATO * mass * quarter, provenance),
        _rep("current_term_nonnegative", -b_j, 0.0, provenance),
        _rep("md_interaction_nonnegative", -(b_rho - b_j), 0.0, provenance),
        _rep("current_below_density", float(np.max(jmag - rho)) / scale, 0.0, provenance, abs_slack=1e-12),
    ]


# ----------------------------------------------------------- decomposition


def _q_md(psi_hat: np.ndarray, kernel: InteractionKernel) -> float:
    return evaluate(psi_hat, 1.0, ModelKind.MAXWELL_DIRAC, kernel, 0.0, gradient=False).breakdown.interaction


def compose_from_blocks(v: Field, minus_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """psi = sqrt(1 - ||psi_-||^2) w + psi_- with w = U^-1 (0, v); returns (psi, w, psi_-) in momentum space."""
    grid = v.grid
    sd = build_spectral_data(grid)
    vh = v.to("momentum").values
    vh = vh / math.sqrt(float(np.vdot(vh, vh).real * grid.w_p))
    s2 = float(np.vdot(minus_hat, minus_hat).real * grid.w_p)
    if s2 >= 1.0:
        raise ValueError("psi_- must have L2 norm below one")
    md = ModelKind.MAXWELL_DIRAC
    zero = np.zeros_like(vh)
    w = assemble_hat(vh, zero, md, sd)
    pm = assemble_hat(zero, minus_hat, md, sd)
    return math.sqrt(1.0 - s2) * w + pm, w, pm


def check_key_lemma(v: Field, minus_hat: np.ndarray, kernel: InteractionKernel | None = None, provenance: str = "") -> list[CheckReport]:
    """Both lower bounds on Q_MD(psi) for psi = psi_+ + psi_- with psi_+ parallel to U^-1 (0, v).

    ``minus_hat`` is the FW block of psi_- (momentum space, X_-(D)).
    """
    grid = v.grid
    kernel = kernel or build_kernel(grid)
    sd = build_spectral_data(grid)
    psi, w, pm = compose_from_blocks(v, minus_hat)
    require_localized(Field(psi, grid, "momentum"))
    vh = v.to("momentum").values
    vh = vh / math.sqrt(float(np.vdot(vh, vh).real * grid.w_p))
    q = _q_md(psi, kernel)
    w_h = _mom_sum(w, sd.lam, grid)
    w_h_excess = _mom_sum(w, sd.lam_minus_one, grid)
    m_l2 = _mom_sum(pm, np.ones_like(sd.lam), grid)
    m_h = _mom_sum(pm, sd.lam, grid)
    grad_v = _mom_sum(vh, sd.p_abs**2, grid)
    v_h = _mom_sum(vh, sd.lam, grid)
    vx = fft_inverse(vh, grid)
    rho_v = density_array(vx)
    b_v = float(np.sum(kernel.convolve(rho_v) * rho_v) * grid.w_x)
    g = GAMMA_KATO
    first = _q_md(w, kernel) - 8 * g * w_h_excess - 10 * g * (m_l2 * w_h + m_h)
    second = b_v - 8 * g * grad_v - 10 * g * (m_l2 * v_h + m_h)
    return [
        _rep("key_lemma_direction_form", first, q, provenance),
        _rep("key_lemma_profile_form", second, q, provenance),
    ]


def check_fw_lower_bound(v: Field, kernel: InteractionKernel | None = None, provenance: str = "") -> list[CheckReport]:
    """Q_MD(w) >= B((w, beta w), (w, beta w)) >= B(rho_v, rho_v) - 4 gamma_K ||grad v||^2."""
    grid = v.grid
    kernel = kernel or build_kernel(grid)
    w = embed_two_spinor(v, ModelKind.MAXWELL_DIRAC)
    require_localized(w)
    wh = w.to("momentum").values
    wx = w.to("position").values
    q = _q_md(wh, kernel)
    beta_density = np.sum(np.abs(wx[:2]) ** 2, axis=0) - np.sum(np.abs(wx[2:]) ** 2, axis=0)
    b_beta = float(np.sum(kernel.convolve(beta_density) * beta_density) * grid.w_x)
    vh = v.to("momentum").values / v.norm()
    rho_v = density_array(fft_inverse(vh, grid))
    b_v = float(np.sum(kernel.convolve(rho_v) * rho_v) * grid.w_x)
    grad_v = _mom_sum(vh, grid.momentum_norm() ** 2, grid)
    return [
        _rep("fw_beta_density_bound", b_beta, q, provenance),
        _rep("fw_profile_bound", b_v - 4 * GAMMA_KATO * grad_v, b_beta, provenance),
    ]


# ------------------------------------------------------------------ solution


def explicit_residual(psi: Field, omega: float, m: float, model: ModelKind, kernel: InteractionKernel, e2: float) -> float:
    """H^-1/2 residual of the stationary equation written with explicit potentials.

    Maxwell-Dirac: D psi - e A_0 psi + e alpha.A psi - omega psi with
    (A_0, A) = e (rho, J) * 1/|x|.  Coulomb-Dirac: H psi + 2 e A_0 psi - omega psi
    with A_0 = -e rho * 1/|x|; the factor 2 is the one produced by varying the
    Coulomb-Dirac energy.  Both carry the factor m of I^(m).
    """
    from .coulomb import potentials
    from .functional import sigma_dot

    model = ModelKind.parse(model)
    grid = psi.grid
    sd = build_spectral_data(grid)
    e = -math.sqrt(e2)
    a0, avec = potentials(psi, kernel, e2, charge_sign=-1)
    x = psi.to("position").values
    ph = psi.to("momentum").values
    if model is ModelKind.MAXWELL_DIRAC:
        pot = -e * a0.values[0] * x
        a = avec.values
        pot[:2] += e * sigma_dot(a, x[2:])
        pot[2:] += e * sigma_dot(a, x[:2])
        lhs = -h_hat(ph, sd) + m * fft_forward(pot, grid)
    else:
        # A_0 = -e rho * 1/|x| is minus the MD-convention potential
        lhs = h_hat(ph, sd) + m * 2 * e * fft_forward(-a0.values[0] * x, grid)
    return residual_hat(lhs, ph, omega, grid)


def check_solution(result, num_probes: int = 20, seed: int = 0) -> list[CheckReport]:
    """Itemized post-conditions of a converged solve (see :func:`minimize`)."""
    cfg = result.config
    kernel = build_kernel(cfg.grid, cfg.kernel)
    out = list(result.property_report)
    out += [CheckReport(f"fiber_{r.name}", r.lhs, r.rhs, r.slack, r.abs_slack, r.strict) for r in result.fiber.property_report]
    if result.fiber.converged:
        out += certify_concavity(result.fiber, cfg.m, cfg.model, kernel, cfg.e2, num_probes, seed)
    res = explicit_residual(result.psi, result.omega, cfg.m, cfg.model, kernel, cfg.e2)
    out.append(CheckReport("explicit_potential_residual", res, cfg.tol_residual, slack=0.0, abs_slack=0.0))
    return out


# --------------------------------------------------------------------- suite


def random_minus_block(grid: GridSpec, rng: np.random.Generator, max_norm: float = 0.5, width: float = 2.5) -> np.ndarray:
    return random_tangent_minus(grid, ModelKind.MAXWELL_DIRAC, rng, width=width, scale=max_norm * rng.uniform(0.0, 1.0))


def random_profile(grid: GridSpec, rng: np.random.Generator, width: float = 2.5) -> Field:
    return random_localized_field(grid, 2, rng, width)


def inequality_suite(seeds, grid: GridSpec = GridSpec(64, 60.0), width: float = 2.5) -> list[CheckReport]:
    """Every inequality check on one seeded localized field per seed."""
    kernel = build_kernel(grid)
    out: list[CheckReport] = []
    for s in seeds:
        rng = np.random.default_rng(s)
        tag = f"seed {s}"
        f = random_localized_field(grid, 4, rng, width)
        out.append(check_kato(f, tag))
        out.append(check_hardy(f, tag))
        out += check_interaction_bounds(f, kernel, tag)
        v = random_profile(grid, rng, width)
        out += check_key_lemma(v, random_minus_block(grid, rng, width=width), kernel, tag)
        out += check_fw_lower_bound(v, kernel, tag)
    return out


def gaussian_profile(grid: GridSpec, sigma: float) -> Field:
    v = np.zeros((2, *grid.shape), dtype=complex)
    v[0] = gaussian(grid, sigma)
    return Field(v, grid)


def write_reports(path, reports) -> None:
    Path(path).write_text(json.dumps([r.to_dict() for r in reports], indent=2))


def fiber_reproduction_problem(cfg) -> Problem:
    return Problem(cfg.m, cfg.model, build_kernel(cfg.grid, cfg.kernel), cfg.e2)


__all__ = [
    "DelocalizedError",
    "check_fw_lower_bound",
    "check_hardy",
    "check_interaction_bounds",
    "check_kato",
    "check_key_lemma",
    "check_solution",
    "explicit_residual",
    "inequality_suite",
    "write_reports",
]
