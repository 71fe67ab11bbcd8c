"""Free Dirac operator, spectral projectors and the Foldy-Wouthuysen transform.

Everything here is a pointwise 4x4 (or 2x2) product in momentum space.
Spinors are stored as ``(4, n, n, n)`` arrays ordered (upper two, lower two).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import Field, GridSpec

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
BETA = np.diag([1, 1, -1, -1]).astype(complex)
ALPHA = np.zeros((3, 4, 4), dtype=complex)
for _k in range(3):
    ALPHA[_k, :2, 2:] = SIGMA[_k]
    ALPHA[_k, 2:, :2] = SIGMA[_k]


class ModelKind(enum.Enum):
    """Which functional is being extremized.

    ``MAXWELL_DIRAC`` uses ``D = i alpha.grad - beta`` with prefactor e^2/2 on
    rho-rho minus J-J; ``COULOMB_DIRAC`` uses ``H = -D`` with prefactor e^2 on
    rho-rho only.
    """

    MAXWELL_DIRAC = "md"
    COULOMB_DIRAC = "cd"

    @property
    def operator_sign(self) -> int:
        """Sign s with (operator) = s * H."""
        return -1 if self is ModelKind.MAXWELL_DIRAC else 1

    @property
    def plus_block(self) -> slice:
        """FW block holding the model's positive spectral subspace."""
        return slice(2, 4) if self is ModelKind.MAXWELL_DIRAC else slice(0, 2)

    @property
    def minus_block(self) -> slice:
        return slice(0, 2) if self is ModelKind.MAXWELL_DIRAC else slice(2, 4)

    @property
    def includes_current(self) -> bool:
        return self is ModelKind.MAXWELL_DIRAC

    def prefactor(self, e2: float) -> float:
        """Coefficient multiplying the interaction in I^(1)."""
        return 0.5 * e2 if self is ModelKind.MAXWELL_DIRAC else e2

    def effective_coupling(self, e2: float) -> float:
        """Twice the prefactor; the constant that enters the a-priori bounds."""
        return 2.0 * self.prefactor(e2)

    @classmethod
    def parse(cls, value) -> ModelKind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown model {value!r}; expected 'md' or 'cd'") from None


@dataclass(frozen=True, eq=False)
class DiracSpectralData:
    grid: GridSpec
    lam: np.ndarray
    u_plus: np.ndarray
    u_minus: np.ndarray
    unit_p: np.ndarray  # (3, n, n, n); zero vector at p = 0
    lam_minus_one: np.ndarray  # lambda - 1 without cancellation
    p_abs: np.ndarray

    def sigma_dot_phat(self, chi: np.ndarray) -> np.ndarray:
        """(sigma . p/|p|) chi for a 2-spinor array ``chi``."""
        px, py, pz = self.unit_p
        out = np.empty_like(chi)
        out[0] = pz * chi[0] + (px - 1j * py) * chi[1]
        out[1] = (px + 1j * py) * chi[0] - pz * chi[1]
        return out

    def u_matrix(self, index: tuple[int, int, int], inverse: bool = False) -> np.ndarray:
        """Explicit 4x4 U(p) (or its inverse) at a single momentum node."""
        ap = np.einsum("k,kij->ij", self.unit_p[(slice(None), *index)], ALPHA)
        sign = -1.0 if inverse else 1.0
        return self.u_plus[index] * np.eye(4) + sign * self.u_minus[index] * (BETA @ ap)


@lru_cache(maxsize=8)
def build_spectral_data(grid: GridSpec) -> DiracSpectralData:
    """Tabulate lambda(p), u_+(p), u_-(p) and p/|p| once per grid."""
    pn = grid.momentum_norm()
    px, py, pz = grid.momenta()
    p2 = pn**2
    lam = np.sqrt(p2 + 1.0)
    lam_m1 = p2 / (lam + 1.0)
    u_plus = np.sqrt(0.5 * (1.0 + 1.0 / lam))
    # 1 - 1/lambda = (lambda - 1)/lambda, kept cancellation-free
    u_minus = np.sqrt(0.5 * lam_m1 / lam)
    safe = np.where(pn > 0, pn, 1.0)
    unit = np.stack(np.broadcast_arrays(px / safe, py / safe, pz / safe))
    unit = np.where(pn > 0, unit, 0.0)
    pn = np.broadcast_to(pn, lam.shape).copy()
    for a in (lam, u_plus, u_minus, unit, lam_m1, pn):
        a.setflags(write=False)
    return DiracSpectralData(grid, lam, u_plus, u_minus, unit, lam_m1, pn)


# ------------------------------------------------------ raw momentum kernels


def fw_forward_hat(psi_hat: np.ndarray, sd: DiracSpectralData) -> np.ndarray:
    """U(p) psi_hat(p)."""
    up, um = sd.u_plus, sd.u_minus
    top, bot = psi_hat[:2], psi_hat[2:]
    out = np.empty_like(psi_hat)
    out[:2] = up * top + um * sd.sigma_dot_phat(bot)
    out[2:] = up * bot - um * sd.sigma_dot_phat(top)
    return out


def fw_inverse_hat(phi_hat: np.ndarray, sd: DiracSpectralData) -> np.ndarray:
    """U(p)^-1 phi_hat(p)."""
    up, um = sd.u_plus, sd.u_minus
    top, bot = phi_hat[:2], phi_hat[2:]
    out = np.empty_like(phi_hat)
    out[:2] = up * top - um * sd.sigma_dot_phat(bot)
    out[2:] = up * bot + um * sd.sigma_dot_phat(top)
    return out


def assemble_hat(plus: np.ndarray, minus: np.ndarray, kind: ModelKind, sd: DiracSpectralData) -> np.ndarray:
    """Momentum spinor whose FW blocks are ``plus`` and ``minus`` for ``kind``."""
    phi = np.empty((4, *plus.shape[1:]), dtype=complex)
    phi[kind.plus_block] = plus
    phi[kind.minus_block] = minus
    return fw_inverse_hat(phi, sd)


def split_hat(psi_hat: np.ndarray, kind: ModelKind, sd: DiracSpectralData) -> tuple[np.ndarray, np.ndarray]:
    """FW (plus, minus) blocks of a momentum spinor."""
    phi = fw_forward_hat(psi_hat, sd)
    return phi[kind.plus_block], phi[kind.minus_block]


def h_hat(psi_hat: np.ndarray, sd: DiracSpectralData) -> np.ndarray:
    """(alpha.p + beta) psi_hat."""
    pn = sd.p_abs
    top, bot = psi_hat[:2], psi_hat[2:]
    out = np.empty_like(psi_hat)
    out[:2] = top + pn * sd.sigma_dot_phat(bot)
    out[2:] = pn * sd.sigma_dot_phat(top) - bot
    return out


# ------------------------------------------------------------ field-level API


def _spectral(f: Field) -> DiracSpectralData:
    return build_spectral_data(f.grid)


def _require_spinor(f: Field) -> None:
    if f.ncomp != 4:
        raise ValueError(f"expected a 4-component spinor, got {f.ncomp} components")


def apply_operator(psi: Field, kind: ModelKind) -> Field:
    """H psi for Coulomb-Dirac, D psi = -H psi for Maxwell-Dirac."""
    _require_spinor(psi)
    ph = psi.to("momentum")
    out = Field(kind.operator_sign * h_hat(ph.values, _spectral(psi)), psi.grid, "momentum")
    return out.to(psi.representation)


def project(psi: Field, sign: int, kind: ModelKind) -> Field:
    """Spectral projection onto the positive (sign=+1) or negative subspace of ``kind``'s operator."""
    _require_spinor(psi)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    sd = _spectral(psi)
    phi = fw_forward_hat(psi.to("momentum").values, sd)
    keep = kind.plus_block if sign == 1 else kind.minus_block
    masked = np.zeros_like(phi)
    masked[keep] = phi[keep]
    return Field(fw_inverse_hat(masked, sd), psi.grid, "momentum").to(psi.representation)


def fw_transform(psi: Field, direction: str = "forward") -> Field:
    """Apply U_FW (``"forward"``) or U_FW^-1 (``"inverse"``)."""
    _require_spinor(psi)
    sd = _spectral(psi)
    ph = psi.to("momentum").values
    if direction == "forward":
        out = fw_forward_hat(ph, sd)
    elif direction == "inverse":
        out = fw_inverse_hat(ph, sd)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return Field(out, psi.grid, "momentum").to(psi.representation)


class DegenerateInputError(ValueError):
    pass


def embed_two_spinor(v: Field, kind: ModelKind) -> Field:
    """Lift a two-spinor into the positive subspace through the inverse FW map.

    Returns ``U_FW^-1 (0, v)`` for Maxwell-Dirac and ``U_FW^-1 (v, 0)`` for
    Coulomb-Dirac, after L2-normalizing ``v``.  Output is in ``v``'s representation.
    """
    if v.ncomp != 2:
        raise ValueError(f"expected a two-spinor, got {v.ncomp} components")
    nrm = v.norm()
    if nrm == 0.0:
        raise DegenerateInputError("cannot embed the zero two-spinor")
    sd = _spectral(v)
    vh = v.to("momentum").values / nrm
    w = assemble_hat(vh, np.zeros_like(vh), kind, sd)
    return Field(w, v.grid, "momentum").to(v.representation)
