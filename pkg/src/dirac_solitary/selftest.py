"""Fast sanity suite: exact identities that must hold on any build."""

from __future__ import annotations

import numpy as np

from .coulomb import build_kernel
from .dirac import ModelKind, apply_operator, build_spectral_data, fw_transform, project
from .functional import energy, gradient
from .grid import Field, GridSpec, l2_inner, random_field, random_localized_field
from .minimizer import SolveConfig, minimize
from .reports import CheckReport


def _rel(a: Field, b: Field) -> float:
    return (a - b).norm() / max(b.norm(), 1e-300)


def run_selftest(seed: int = 0) -> list[CheckReport]:
    grid = GridSpec(16, 20.0)
    rng = np.random.default_rng(seed)
    f = random_field(grid, 4, rng)
    out = []
    tol = dict(slack=0.0, abs_slack=1e-12)
    out.append(CheckReport("transform_round_trip", _rel(f.to("momentum").to("position"), f), 0.0, **tol))
    out.append(CheckReport("parseval", abs(l2_inner(f, f) - l2_inner(f.to("momentum"), f.to("momentum"))), 0.0, **tol))
    sd = build_spectral_data(grid)
    out.append(CheckReport("u_plus_u_minus_unit", float(np.max(np.abs(sd.u_plus**2 + sd.u_minus**2 - 1))), 0.0, **tol))
    for kind in ModelKind:
        p, q = project(f, 1, kind), project(f, -1, kind)
        out.append(CheckReport(f"projector_completeness_{kind.value}", _rel(p + q, f), 0.0, **tol))
        out.append(CheckReport(f"projector_idempotent_{kind.value}", _rel(project(p, 1, kind), p), 0.0, **tol))
    out.append(CheckReport("fw_unitary", abs(fw_transform(f).norm() - f.norm()), 0.0, **tol))
    hf = apply_operator(f, ModelKind.COULOMB_DIRAC)
    out.append(CheckReport("dirac_self_adjoint", abs(l2_inner(f, hf).imag), 0.0, **tol))
    kern = build_kernel(grid)
    psi = random_localized_field(grid, 4, rng, 2.0)
    e0 = energy(psi, 0.7, ModelKind.MAXWELL_DIRAC, kern, 0.06).total
    e1 = energy(psi * np.exp(0.3j), 0.7, ModelKind.MAXWELL_DIRAC, kern, 0.06).total
    out.append(CheckReport("energy_phase_invariant", abs(e0 - e1), 0.0, **tol))
    g0 = gradient(psi, 1.0, ModelKind.MAXWELL_DIRAC, kern, 0.0)
    out.append(CheckReport("free_gradient_is_D", _rel(g0, apply_operator(psi, ModelKind.MAXWELL_DIRAC)), 0.0, **tol))
    res = minimize(SolveConfig(e2=0.0, n=16, l=20.0, m=0.5), raise_on_failure=False)
    out.append(CheckReport("free_solve_E_equals_m", abs(res.energy_E - 0.5), 0.0, slack=0.0, abs_slack=1e-10))
    out.append(CheckReport("free_solve_omega_one", abs(res.omega - 1.0), 0.0, slack=0.0, abs_slack=1e-10))
    return out
