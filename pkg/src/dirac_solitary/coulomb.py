"""Densities, currents and Coulomb interaction energies on the periodic grid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .dirac import ModelKind
from .grid import _WORKERS, Field, GridSpec

GAMMA_KATO = math.pi / 2
HARDY_CONSTANT = 4.0
FINE_STRUCTURE = 1 / 137.036


@dataclass(frozen=True)
class AnalyticConstants:
    gamma_K: float = GAMMA_KATO
    hardy_C: float = HARDY_CONSTANT
    e2: float = FINE_STRUCTURE

    def is_small_coupling(self) -> bool:
        """The strictest smallness condition used by the a-priori bounds."""
        return self.e2 * self.gamma_K < 1 / 9


def _kernel_values(p: np.ndarray, variant: str, radius: float) -> np.ndarray:
    p2 = p**2
    safe = np.where(p2 > 0, p2, 1.0)
    if variant == "plain":
        k = 4 * np.pi / safe
        return np.where(p2 > 0, k, 0.0)
    if variant == "truncated":
        # 4 pi (1 - cos(R p)) / p^2 written with sin^2 to avoid cancellation
        k = 8 * np.pi * np.sin(0.5 * radius * p) ** 2 / safe
        return np.where(p2 > 0, k, 2 * np.pi * radius**2)
    raise ValueError(f"unknown kernel variant {variant!r}; expected 'truncated' or 'plain'")


@dataclass(frozen=True, eq=False)
class InteractionKernel:
    """Tabulated Fourier multiplier of 1/|x| (optionally cut off at R = l/2)."""

    grid: GridSpec
    variant: str
    radius: float
    table: np.ndarray  # full FFT layout, (n, n, n)
    half_table: np.ndarray  # rfft layout, (n, n, n//2+1)

    def convolve(self, f: np.ndarray) -> np.ndarray:
        """``f * 1/|x|`` for real arrays with the grid on the last three axes."""
        fk = sfft.rfftn(f, axes=(-3, -2, -1), workers=_WORKERS)
        fk *= self.half_table
        return sfft.irfftn(fk, s=self.grid.shape, axes=(-3, -2, -1), workers=_WORKERS)


@lru_cache(maxsize=16)
def build_kernel(grid: GridSpec, variant: str = "truncated") -> InteractionKernel:
    radius = grid.l / 2
    table = _kernel_values(grid.momentum_norm(), variant, radius)
    k = grid.momentum_axis()
    kz = 2 * np.pi * np.arange(grid.n // 2 + 1) / grid.l
    pn_half = np.sqrt(k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2)
    half = _kernel_values(pn_half, variant, radius)
    table.setflags(write=False)
    half.setflags(write=False)
    return InteractionKernel(grid, variant, radius, table, half)


# ----------------------------------------------------------------- densities


def density_array(psi_x: np.ndarray) -> np.ndarray:
    return np.sum(psi_x.real**2 + psi_x.imag**2, axis=0)


def current_array(psi_x: np.ndarray) -> np.ndarray:
    """J_k = (psi, alpha_k psi) = 2 Re(upper^dagger sigma_k lower)."""
    up, lo = psi_x[:2], psi_x[2:]
    c00 = np.conj(up[0]) * lo[0]
    c01 = np.conj(up[0]) * lo[1]
    c10 = np.conj(up[1]) * lo[0]
    c11 = np.conj(up[1]) * lo[1]
    jx = 2 * (c01 + c10).real
    jy = 2 * (-1j * c01 + 1j * c10).real
    jz = 2 * (c00 - c11).real
    return np.stack([jx, jy, jz])


def _position_spinor(psi: Field) -> np.ndarray:
    if psi.ncomp != 4:
        raise ValueError(f"expected a 4-component spinor, got {psi.ncomp}")
    return psi.to("position").values


def density(psi: Field) -> Field:
    return Field(density_array(_position_spinor(psi)), psi.grid, "position")


def current(psi: Field) -> Field:
    return Field(current_array(_position_spinor(psi)), psi.grid, "position")


def _real_values(f: Field) -> np.ndarray:
    v = f.to("position").values
    return v.real


def coulomb_potential(f: Field, kernel: InteractionKernel) -> Field:
    """Convolution of a real field with 1/|x| via the kernel's Fourier multiplier."""
    if f.grid != kernel.grid:
        raise ValueError("field and kernel live on different grids")
    return Field(kernel.convolve(_real_values(f)), f.grid, "position")


def coulomb_bilinear(f: Field, g: Field, kernel: InteractionKernel) -> float:
    """B(f, g) = sum_p K(p) f_hat conj(g_hat) w_p for real scalar fields."""
    if f.grid != kernel.grid or g.grid != kernel.grid:
        raise ValueError("fields and kernel live on different grids")
    fh = f.to("momentum").values
    gh = g.to("momentum").values
    return float(np.sum(kernel.table * fh * np.conj(gh)).real * f.grid.w_p)


def interaction_arrays(psi_x: np.ndarray, kind: ModelKind, kernel: InteractionKernel):
    """Sources, potentials and Q(psi) for a position-space spinor.

    Returns ``(sources, potentials, Q)`` where ``sources`` stacks rho (and J for
    Maxwell-Dirac) and ``potentials`` their Coulomb convolutions.
    """
    rho = density_array(psi_x)
    if kind.includes_current:
        sources = np.concatenate([rho[None], current_array(psi_x)])
    else:
        sources = rho[None]
    pots = kernel.convolve(sources)
    w_x = kernel.grid.w_x
    q = np.sum(pots[0] * sources[0]) * w_x
    if kind.includes_current:
        q -= np.sum(pots[1:] * sources[1:]) * w_x
    return sources, pots, float(q)


def interaction_energy(psi: Field, kind: ModelKind, kernel: InteractionKernel) -> float:
    """Q_MD = B(rho,rho) - sum_k B(J_k,J_k), or Q_CD = B(rho,rho)."""
    return interaction_arrays(_position_spinor(psi), kind, kernel)[2]


def potentials(psi: Field, kernel: InteractionKernel, e2: float, charge_sign: int = -1) -> tuple[Field, Field]:
    """(A_0, A) = e (rho, J) * 1/|x| with e = charge_sign * sqrt(e2)."""
    e = charge_sign * math.sqrt(e2)
    psi_x = _position_spinor(psi)
    sources = np.concatenate([density_array(psi_x)[None], current_array(psi_x)])
    pots = e * kernel.convolve(sources)
    return Field(pots[0], psi.grid, "position"), Field(pots[1:], psi.grid, "position")


