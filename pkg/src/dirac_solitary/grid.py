"""Periodic cubic grid, fields, Fourier transforms and quadrature inner products.

Conventions
-----------
Position nodes are ``x_j = -l/2 + j*h`` (``j = 0..n-1``) so localized fields sit
at the box centre.  Momentum arrays are kept in FFT (``fftfreq``) order with
``p_k = 2*pi*k/l``.  The transform is the unitary one,

    u_hat(p) = (2 pi)^(-3/2) * sum_x exp(-i p.x) u(x) * h^3,

and inner products are conjugate-linear in the *first* slot:
``<f|g> = sum conj(f) g * weight``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.fft as sfft

Representation = Literal["position", "momentum"]

_WORKERS = int(os.environ.get("DSOL_THREADS", "0")) or None
SNAPSHOT_MAGIC = b"DSOL1"
_REP_CODE = {"position": 0, "momentum": 1}
_CODE_REP = {v: k for k, v in _REP_CODE.items()}


class GridMismatchError(ValueError):
    """Fields living on different grids or in different representations."""


@dataclass(frozen=True)
class GridSpec:
    n: int = 64
    l: float = 60.0

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and >= 8, got {self.n}")
        if not self.l > 0:
            raise ValueError(f"box length must be positive, got {self.l}")

    @property
    def h(self) -> float:
        return self.l / self.n

    @property
    def w_x(self) -> float:
        return self.h**3

    @property
    def w_p(self) -> float:
        return (2 * np.pi / self.l) ** 3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    def axis(self) -> np.ndarray:
        return -self.l / 2 + self.h * np.arange(self.n)

    def momentum_axis(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _coords(self)

    def momenta(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _momenta(self)

    def radius(self) -> np.ndarray:
        """Minimum-image distance |x| from the origin (the box centre)."""
        return _radius(self)

    def momentum_norm(self) -> np.ndarray:
        return _pnorm(self)


@lru_cache(maxsize=8)
def _coords(grid: GridSpec):
    a = grid.axis()
    return tuple(np.meshgrid(a, a, a, indexing="ij", sparse=True))


@lru_cache(maxsize=8)
def _momenta(grid: GridSpec):
    k = grid.momentum_axis()
    return tuple(np.meshgrid(k, k, k, indexing="ij", sparse=True))


@lru_cache(maxsize=8)
def _radius(grid: GridSpec) -> np.ndarray:
    x, y, z = grid.coordinates()
    # nodes already lie in [-l/2, l/2), which is the minimum image of the origin
    return np.sqrt(x**2 + y**2 + z**2)


@lru_cache(maxsize=8)
def _pnorm(grid: GridSpec) -> np.ndarray:
    px, py, pz = grid.momenta()
    return np.sqrt(px**2 + py**2 + pz**2)


@lru_cache(maxsize=8)
def _phase(grid: GridSpec) -> np.ndarray:
    # exp(i p_k l/2) = (-1)^k accounts for the node offset -l/2
    k = np.rint(np.fft.fftfreq(grid.n) * grid.n).astype(int)
    s = np.where(k % 2 == 0, 1.0, -1.0)
    return s[:, None, None] * s[None, :, None] * s[None, None, :]


def fft_forward(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Position samples -> momentum samples over the last three axes."""
    scale = grid.w_x * (2 * np.pi) ** -1.5
    return sfft.fftn(u, axes=(-3, -2, -1), workers=_WORKERS) * (_phase(grid) * scale)


def fft_inverse(u_hat: np.ndarray, grid: GridSpec) -> np.ndarray:
    scale = grid.w_p * (2 * np.pi) ** -1.5 * grid.n**3
    return sfft.ifftn(u_hat * (_phase(grid) * scale), axes=(-3, -2, -1), workers=_WORKERS)


@dataclass
class Field:
    """Multi-component field on a grid.

    ``values`` has shape ``(ncomp, n, n, n)``.  One component is a scalar
    field, two a two-spinor, three a real vector field, four a Dirac spinor.
    """

    values: np.ndarray
    grid: GridSpec
    representation: Representation = "position"

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 3:
            v = v[None]
        if v.shape[1:] != self.grid.shape:
            raise GridMismatchError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if self.representation not in _REP_CODE:
            raise ValueError(f"unknown representation {self.representation!r}")
        self.values = v

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    def to(self, representation: Representation) -> Field:
        if representation == self.representation:
            return self
        return transform(self, representation)

    def copy(self) -> Field:
        return Field(self.values.copy(), self.grid, self.representation)

    def norm(self) -> float:
        return float(np.sqrt(l2_inner(self, self).real))

    def __add__(self, other: Field) -> Field:
        _check_compatible(self, other)
        return Field(self.values + other.values, self.grid, self.representation)

    def __sub__(self, other: Field) -> Field:
        _check_compatible(self, other)
        return Field(self.values - other.values, self.grid, self.representation)

    def __mul__(self, c) -> Field:
        return Field(self.values * c, self.grid, self.representation)

    __rmul__ = __mul__


# Named aliases for readability at call sites; the component count is the only difference.
SpinorField = Field
TwoSpinorField = Field
ScalarField = Field
VectorField3 = Field


def transform(f: Field, direction: Representation) -> Field:
    """Convert ``f`` to ``direction`` ("momentum" or "position")."""
    if direction == "momentum":
        if f.representation != "position":
            raise GridMismatchError("forward transform expects a position-space field")
        return Field(fft_forward(f.values, f.grid), f.grid, "momentum")
    if direction == "position":
        if f.representation != "momentum":
            raise GridMismatchError("inverse transform expects a momentum-space field")
        return Field(fft_inverse(f.values, f.grid), f.grid, "position")
    raise ValueError(f"unknown direction {direction!r}")


def _check_compatible(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {g.grid}")
    if f.representation != g.representation:
        raise GridMismatchError(f"representation mismatch: {f.representation} vs {g.representation}")
    if f.ncomp != g.ncomp:
        raise GridMismatchError(f"component mismatch: {f.ncomp} vs {g.ncomp}")


def _weight(f: Field) -> float:
    return f.grid.w_x if f.representation == "position" else f.grid.w_p


def l2_inner(f: Field, g: Field) -> complex:
    _check_compatible(f, g)
    return complex(np.vdot(f.values, g.values) * _weight(f))


SUPPORTED_SOBOLEV = (-0.5, 0.5, 1.0)


def sobolev_inner(f: Field, g: Field, s: float) -> complex:
    """``sum_p lambda(p)^(2s) conj(f_hat) g_hat w_p`` with ``lambda = sqrt(|p|^2+1)``."""
    if s not in SUPPORTED_SOBOLEV:
        raise ValueError(f"unsupported Sobolev exponent {s}; use one of {SUPPORTED_SOBOLEV}")
    _check_compatible(f, g)
    fh, gh = f.to("momentum"), g.to("momentum")
    weight = (f.grid.momentum_norm() ** 2 + 1.0) ** s
    return complex(np.sum(np.conj(fh.values) * gh.values * weight) * f.grid.w_p)


def sobolev_norm2(f: Field, s: float) -> float:
    return sobolev_inner(f, f, s).real


# ---------------------------------------------------------------- test fields


def gaussian(grid: GridSpec, sigma: float, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Real Gaussian amplitude whose square is a unit-mass density of std ``sigma``."""
    x, y, z = grid.coordinates()
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2
    return (2 * np.pi * sigma**2) ** -0.75 * np.exp(-r2 / (4 * sigma**2))


def random_field(grid: GridSpec, ncomp: int, rng: np.random.Generator, smooth: float | None = None) -> Field:
    """Complex white noise, optionally low-pass filtered in momentum space."""
    v = rng.standard_normal((ncomp, *grid.shape)) + 1j * rng.standard_normal((ncomp, *grid.shape))
    f = Field(v, grid, "position")
    if smooth is not None:
        fh = f.to("momentum")
        fh.values *= np.exp(-0.5 * (grid.momentum_norm() * smooth) ** 2)
        f = fh.to("position")
    return f * (1.0 / f.norm())


def random_localized_field(
    grid: GridSpec, ncomp: int, rng: np.random.Generator, width: float = 3.0, bandlimit: float | None = None
) -> Field:
    """Smooth random field times a Gaussian envelope, low-pass filtered again, L2-normalized.

    The final filter ``exp(-(p * bandlimit)^2 / 2)`` (default ``max(width / 2, 1.8 h)``)
    keeps the spectrum away from the Nyquist edge, where the Dirac multipliers jump.
    """
    base = random_field(grid, ncomp, rng, smooth=width / 3)
    f = Field(base.values * np.exp(-grid.radius() ** 2 / (2 * width**2)), grid, "position").to("momentum")
    bl = max(width / 2, 1.8 * grid.h) if bandlimit is None else bandlimit
    f.values *= np.exp(-0.5 * (grid.momentum_norm() * bl) ** 2)
    f = f.to("position")
    return f * (1.0 / f.norm())


# ------------------------------------------------------------------ snapshots


def save_field(path: str | Path, f: Field) -> None:
    """Write ``f`` in the DSOL1 binary format (little endian, z fastest)."""
    head = SNAPSHOT_MAGIC + struct.pack("<IdBB", f.grid.n, f.grid.l, f.ncomp, _REP_CODE[f.representation])
    data = np.empty(f.values.shape + (2,), dtype="<f8")
    data[..., 0] = f.values.real
    data[..., 1] = f.values.imag
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data.tobytes(order="C"))


def load_field(path: str | Path) -> Field:
    raw = Path(path).read_bytes()
    if raw[:5] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a DSOL1 snapshot")
    n, l, ncomp, rep = struct.unpack_from("<IdBB", raw, 5)
    offset = 5 + struct.calcsize("<IdBB")
    expected = ncomp * n**3 * 16
    if len(raw) - offset != expected:
        raise ValueError(f"{path}: payload is {len(raw) - offset} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f8", offset=offset).reshape(ncomp, n, n, n, 2)
    return Field(data[..., 0] + 1j * data[..., 1], GridSpec(n, l), _CODE_REP[rep])
