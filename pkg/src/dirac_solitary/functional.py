"""The energy family I^(m), its derivatives, the multiplier omega and the residual.

For a model with interaction prefactor ``c`` (e^2/2 for Maxwell-Dirac, e^2 for
Coulomb-Dirac) the functional is

    I^(m)(psi) = ||psi_+||^2_{H^1/2} - ||psi_-||^2_{H^1/2} - m c Q(psi),

and the L2 gradient ``g`` is defined by ``dI[h] = 2 Re <g|h>``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .coulomb import InteractionKernel, interaction_arrays
from .dirac import ModelKind, build_spectral_data, fw_forward_hat, h_hat
from .grid import Field, fft_forward, fft_inverse


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic_plus: float
    kinetic_minus: float
    interaction: float
    total: float
    m: float
    model: ModelKind
    # total - ||psi||^2 evaluated without cancellation; the solvers compare these
    excess: float = 0.0


@dataclass(frozen=True)
class MultiplierEstimate:
    omega: float
    renormalized: bool = False


def check_mass_parameter(m: float) -> None:
    if not 0.0 < m <= 1.0:
        raise ValueError(f"m must lie in (0, 1], got {m}")


def sigma_dot(vec: np.ndarray, chi: np.ndarray) -> np.ndarray:
    """(sigma . V(x)) chi for a real 3-vector field V and two-spinor chi."""
    vx, vy, vz = vec
    out = np.empty_like(chi)
    out[0] = vz * chi[0] + (vx - 1j * vy) * chi[1]
    out[1] = (vx + 1j * vy) * chi[0] - vz * chi[1]
    return out


def apply_potentials(psi_x: np.ndarray, pots: np.ndarray, kind: ModelKind) -> np.ndarray:
    """W psi = V_rho psi - sum_k V_Jk alpha_k psi (the current term only for Maxwell-Dirac)."""
    out = pots[0] * psi_x
    if kind.includes_current:
        out[:2] -= sigma_dot(pots[1:], psi_x[2:])
        out[2:] -= sigma_dot(pots[1:], psi_x[:2])
    return out


def pair_sources(f_x: np.ndarray, g_x: np.ndarray, kind: ModelKind) -> np.ndarray:
    """Stack of Re(f, g) and, for Maxwell-Dirac, Re(f, alpha_k g)."""
    s0 = np.sum(np.conj(f_x) * g_x, axis=0).real
    if not kind.includes_current:
        return s0[None]
    fu, fl, gu, gl = f_x[:2], f_x[2:], g_x[:2], g_x[2:]
    a = np.conj(fu[0]) * gl[1] + np.conj(fu[1]) * gl[0] + np.conj(fl[0]) * gu[1] + np.conj(fl[1]) * gu[0]
    b = -1j * (np.conj(fu[0]) * gl[1] + np.conj(fl[0]) * gu[1]) + 1j * (np.conj(fu[1]) * gl[0] + np.conj(fl[1]) * gu[0])
    c = np.conj(fu[0]) * gl[0] - np.conj(fu[1]) * gl[1] + np.conj(fl[0]) * gu[0] - np.conj(fl[1]) * gu[1]
    return np.stack([s0, a.real, b.real, c.real])


def signed_bilinear(a_src: np.ndarray, b_pot: np.ndarray, kind: ModelKind, w_x: float) -> float:
    """B(a0, b0) - sum_k B(ak, bk) given sources ``a`` and potentials of ``b``."""
    val = np.sum(a_src[0] * b_pot[0])
    if kind.includes_current:
        val -= np.sum(a_src[1:] * b_pot[1:])
    return float(val * w_x)


@dataclass
class Evaluation:
    """Energy (and optionally gradient) of a momentum-space spinor."""

    psi_hat: np.ndarray
    psi_x: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    breakdown: EnergyBreakdown
    sources: np.ndarray
    pots: np.ndarray
    grad_hat: np.ndarray | None = None


def evaluate(
    psi_hat: np.ndarray,
    m: float,
    kind: ModelKind,
    kernel: InteractionKernel,
    e2: float,
    gradient: bool = True,
) -> Evaluation:
    grid = kernel.grid
    sd = build_spectral_data(grid)
    phi = fw_forward_hat(psi_hat, sd)
    plus, minus = phi[kind.plus_block], phi[kind.minus_block]
    ap = np.sum(plus.real**2 + plus.imag**2, axis=0)
    am = np.sum(minus.real**2 + minus.imag**2, axis=0)
    kp = float(np.sum(sd.lam * ap) * grid.w_p)
    km = float(np.sum(sd.lam * am) * grid.w_p)
    kp_excess = float(np.sum(sd.lam_minus_one * ap) * grid.w_p)
    km_plus_norm = float(np.sum((sd.lam + 1.0) * am) * grid.w_p)

    psi_x = fft_inverse(psi_hat, grid)
    sources, pots, q = interaction_arrays(psi_x, kind, kernel)
    c = m * kind.prefactor(e2)
    total = kp - km - c * q
    excess = kp_excess - km_plus_norm - c * q
    bd = EnergyBreakdown(kp, km, q, total, m, kind, excess)
    ev = Evaluation(psi_hat, psi_x, plus, minus, bd, sources, pots)
    if gradient:
        kin = kind.operator_sign * h_hat(psi_hat, sd)
        ev.grad_hat = kin - (2 * c) * fft_forward(apply_potentials(psi_x, pots, kind), grid)
    return ev


# ------------------------------------------------------------- field-level API


def _spinor_hat(psi: Field, kernel: InteractionKernel) -> np.ndarray:
    if psi.ncomp != 4:
        raise ValueError(f"expected a 4-component spinor, got {psi.ncomp}")
    if psi.grid != kernel.grid:
        raise ValueError("spinor and kernel live on different grids")
    return psi.to("momentum").values


def energy(psi: Field, m: float, model: ModelKind, kernel: InteractionKernel, e2: float) -> EnergyBreakdown:
    check_mass_parameter(m)
    return evaluate(_spinor_hat(psi, kernel), m, model, kernel, e2, gradient=False).breakdown


def gradient(psi: Field, m: float, model: ModelKind, kernel: InteractionKernel, e2: float) -> Field:
    """L2 gradient g with dI^(m)(psi)[h] = 2 Re <g|h>, in psi's representation."""
    check_mass_parameter(m)
    ev = evaluate(_spinor_hat(psi, kernel), m, model, kernel, e2)
    return Field(ev.grad_hat, psi.grid, "momentum").to(psi.representation)


def omega_estimate(psi: Field, m: float, model: ModelKind, kernel: InteractionKernel, e2: float) -> MultiplierEstimate:
    """omega = Re <g|psi> = dI^(m)(psi)[psi] / 2 for unit psi."""
    check_mass_parameter(m)
    ph = _spinor_hat(psi, kernel)
    nrm2 = float(np.vdot(ph, ph).real * psi.grid.w_p)
    if nrm2 == 0.0:
        raise ValueError("omega is undefined for the zero spinor")
    renorm = abs(nrm2 - 1.0) > 1e-10
    if renorm:
        warnings.warn(f"omega_estimate: renormalizing spinor with ||psi||^2 = {nrm2:.6g}", stacklevel=2)
        ph = ph / np.sqrt(nrm2)
    ev = evaluate(ph, m, model, kernel, e2)
    return MultiplierEstimate(float(np.vdot(ev.grad_hat, ph).real * psi.grid.w_p), renorm)


def hessian_form(
    psi: Field, h: Field, k: Field, m: float, model: ModelKind, kernel: InteractionKernel, e2: float
) -> float:
    """Second derivative d^2 I^(m)(psi)[h; k]."""
    check_mass_parameter(m)
    grid = kernel.grid
    sd = build_spectral_data(grid)
    hh, kh = _spinor_hat(h, kernel), _spinor_hat(k, kernel)
    kin = 2.0 * float(np.vdot(kh, model.operator_sign * h_hat(hh, sd)).real * grid.w_p)

    psi_x = psi.to("position").values
    h_x, k_x = fft_inverse(hh, grid), fft_inverse(kh, grid)
    s_ph = pair_sources(psi_x, h_x, model)
    s_pk = pair_sources(psi_x, k_x, model)
    s_pp = pair_sources(psi_x, psi_x, model)
    s_hk = pair_sources(h_x, k_x, model)
    pots = kernel.convolve(np.concatenate([s_pk, s_pp]))
    nsrc = s_pk.shape[0]
    d2q = 8.0 * signed_bilinear(s_ph, pots[:nsrc], model, grid.w_x)
    d2q += 4.0 * signed_bilinear(s_hk, pots[nsrc:], model, grid.w_x)
    return kin - m * model.prefactor(e2) * d2q


def residual_hat(grad_hat: np.ndarray, psi_hat: np.ndarray, omega: float, grid) -> float:
    sd = build_spectral_data(grid)
    r = grad_hat - omega * psi_hat
    return float(np.sqrt(np.sum((r.real**2 + r.imag**2) / sd.lam) * grid.w_p))


def residual(psi: Field, omega: float, m: float, model: ModelKind, kernel: InteractionKernel, e2: float) -> float:
    """||g - omega psi||_{H^-1/2}; zero exactly at solutions of the eigenvalue problem."""
    check_mass_parameter(m)
    ph = _spinor_hat(psi, kernel)
    ev = evaluate(ph, m, model, kernel, e2)
    return residual_hat(ev.grad_hat, ph, omega, kernel.grid)
