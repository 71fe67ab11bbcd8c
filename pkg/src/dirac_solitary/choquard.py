"""Radial shooting for the Choquard (Schroedinger-Newton) ground state.

The nonrelativistic limit of the Coulomb-Dirac problem minimizes
``1/2 ||grad phi||^2 - k B(|phi|^2, |phi|^2)`` over unit ``phi``; its minimum is
``-k^2 C`` with ``C = sup B^2 / (2 ||grad phi||^2)``.  The supremum is attained
at the positive radial solution of

    -Lap u = U u,     -Lap U = 4 pi u^2,     u(0) = 1,

shot on ``U(0)`` so that ``u`` decays without a node.  ``C`` is scale invariant,
so the normalization ``u(0) = 1`` is harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp


@dataclass(frozen=True)
class ChoquardProfile:
    u0_shift: float  # the shooting parameter U(0)
    mass: float  # int u^2
    kinetic: float  # int |u'|^2
    coulomb: float  # B(u^2, u^2)
    r_max: float

    @property
    def constant(self) -> float:
        return self.coulomb**2 / (2.0 * self.kinetic * self.mass**3)


def _rhs(r, y):
    u, du, U, dU = y
    return [du, -U * u - 2.0 * du / r, dU, -4.0 * math.pi * u * u - 2.0 * dU / r]


def _start(U0: float, r0: float):
    # series u = 1 - U0 r^2/6, U = U0 - 4 pi r^2/6 near the origin
    return [1.0 - U0 * r0**2 / 6, -U0 * r0 / 3, U0 - 4 * math.pi * r0**2 / 6, -4 * math.pi * r0 / 3]


def _shoot(U0: float, r_end: float):
    """+1 if u turns upward before crossing zero, -1 if it crosses zero."""

    def crossed(r, y):
        return y[0]

    crossed.terminal = True
    crossed.direction = -1

    def turned(r, y):
        return y[1]

    turned.terminal = True
    turned.direction = 1

    r0 = 1e-6
    sol = solve_ivp(_rhs, (r0, r_end), _start(U0, r0), events=(crossed, turned), rtol=1e-11, atol=1e-14, dense_output=True)
    if sol.t_events[0].size:
        return -1, sol
    return 1, sol


@lru_cache(maxsize=4)
def choquard_profile(r_end: float = 60.0, iters: int = 80) -> ChoquardProfile:
    lo, hi = 0.1, 20.0  # U0 too small: u turns up; too large: u crosses zero
    if _shoot(lo, r_end)[0] != 1 or _shoot(hi, r_end)[0] != -1:
        raise RuntimeError("shooting bracket does not straddle the ground state")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _shoot(mid, r_end)[0] == 1:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * hi:
            break
    U0 = 0.5 * (lo + hi)
    _, sol = _shoot(lo, r_end)
    # integrate on the trusted part (up to where u is smallest) and drop the tail
    r = np.linspace(sol.t[0], sol.t[-1], 200001)
    u, du, U, _dU = sol.sol(r)
    cut = int(np.argmin(np.abs(u)))
    r, u, du, U = r[:cut], u[:cut], du[:cut], U[:cut]
    w = 4 * math.pi * r**2
    mass = np.trapezoid(w * u**2, r)
    kin = np.trapezoid(w * du**2, r)
    # -Lap u = U u gives K = int U u^2, and U = V - eps with V -> M/r at infinity
    eps = -(U[-1] - mass * 4 * math.pi / (4 * math.pi * r[-1]))
    V = U + eps
    coul = np.trapezoid(w * V * u**2, r)
    return ChoquardProfile(U0, float(mass), float(kin), float(coul), float(r[-1]))


def choquard_constant() -> float:
    """C = sup over unit phi of B(rho, rho)^2 / (2 ||grad phi||^2), about 0.217."""
    return choquard_profile().constant


def nonrelativistic_binding(e2: float, prefactor_per_e2: float = 1.0, m: float = 1.0) -> float:
    """Leading-order 1 - e(m) for interaction coefficient k = m * prefactor_per_e2 * e2."""
    k = m * prefactor_per_e2 * e2
    return k * k * choquard_constant()
