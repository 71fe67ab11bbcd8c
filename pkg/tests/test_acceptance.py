"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line to the terminal."""

import math
import time

import numpy as np
import pytest

from dirac_solitary.choquard import choquard_constant
from dirac_solitary.coulomb import GAMMA_KATO, build_kernel, coulomb_bilinear
from dirac_solitary.dirac import ModelKind, apply_operator, build_spectral_data, embed_two_spinor, fw_transform, project
from dirac_solitary.fiber import certify_concavity, maximize, uniqueness_probe
from dirac_solitary.functional import energy, gradient, hessian_form
from dirac_solitary.grid import Field, GridSpec, gaussian, l2_inner, random_field, random_localized_field, sobolev_norm2
from dirac_solitary.minimizer import SolveConfig, check_critical_point_characterization, minimize, sweep, trial_upper_bound
from dirac_solitary.reports import failures
from dirac_solitary.verify import gaussian_profile, inequality_suite

from oracles import direct_bilinear, periodic_kernel_table, radial_coulomb_self_energy

E2 = 0.06
MD, CD = ModelKind.MAXWELL_DIRAC, ModelKind.COULOMB_DIRAC


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="session")
def md_solution():
    return minimize(SolveConfig(model=MD, m=1.0, e2=E2, n=64, l=60.0))


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def test_criterion_1_spectral_algebra(report):
    t0 = time.perf_counter()
    g = GridSpec(32, 40.0)
    sd = build_spectral_data(g)
    rng = np.random.default_rng(0)
    worst = 0.0
    for i in range(100):
        f = random_field(g, 4, rng, smooth=1.0)
        kind = MD if i % 2 == 0 else CD
        p, m = project(f, 1, kind), project(f, -1, kind)
        fv = f.values
        worst = max(
            worst,
            _rel((p + m).values, fv),
            _rel(project(p, 1, kind).values, p.values),
            _rel(project(m, -1, kind).values, m.values),
            abs(l2_inner(p, m)) / f.norm() ** 2,
        )
        # U H U^-1 = lambda beta: the FW image of H f is lambda times beta applied to the FW image of f
        phi = fw_transform(f).to("momentum").values
        hphi = fw_transform(apply_operator(f, CD)).to("momentum").values
        beta_phi = np.concatenate([phi[:2], -phi[2:]])
        worst = max(worst, _rel(hphi, sd.lam * beta_phi))
        form = l2_inner(f, apply_operator(f, kind)).real
        split = sobolev_norm2(p, 0.5) - sobolev_norm2(m, 0.5)
        worst = max(worst, abs(form - split) / sobolev_norm2(f, 0.5))
    dt = time.perf_counter() - t0
    report(1, worst <= 1e-10 and dt < 60, f"worst relative defect {worst:.2e} over 100 fields in {dt:.1f}s")


def test_criterion_2_coulomb_oracles(report):
    t0 = time.perf_counter()
    g = GridSpec(64, 60.0)
    sigma = 2.0
    rho = Field(gaussian(g, sigma) ** 2 + 0j, g)
    fft_b = coulomb_bilinear(rho, rho, build_kernel(g, "truncated"))
    dens = lambda r: (2 * np.pi * sigma**2) ** -1.5 * math.exp(-r * r / (2 * sigma**2))
    radial = radial_coulomb_self_energy(dens, 12 * sigma)
    rel_gauss = abs(fft_b - radial) / radial

    g8 = GridSpec(8, 6.0)
    kern8 = build_kernel(g8)
    rng = np.random.default_rng(2)
    f, h = rng.standard_normal(g8.shape), rng.standard_normal(g8.shape)
    direct = direct_bilinear(g8, periodic_kernel_table(g8, kern8.table), f, h)
    spectral = coulomb_bilinear(Field(f + 0j, g8), Field(h + 0j, g8), kern8)
    rel_direct = abs(spectral - direct) / abs(direct)
    dt = time.perf_counter() - t0
    ok = rel_gauss <= 0.01 and rel_direct <= 1e-8 and dt < 120
    report(2, ok, f"Gaussian B rel err {rel_gauss:.2e}, n=8 direct sum rel err {rel_direct:.2e}, {dt:.1f}s")


def test_criterion_3_derivatives(report):
    t0 = time.perf_counter()
    g = GridSpec(24, 24.0)
    kern = build_kernel(g)
    rng = np.random.default_rng(3)
    worst = 0.0
    for kind in (MD, CD):
        for _ in range(3):
            psi = random_localized_field(g, 4, rng, 3.0) * 3.0
            h = random_localized_field(g, 4, rng, 3.0)
            k = random_localized_field(g, 4, rng, 3.0)
            t = 1e-4
            fd = (energy(psi + h * t, 0.9, kind, kern, E2).total - energy(psi - h * t, 0.9, kind, kern, E2).total) / (2 * t)
            an = 2 * l2_inner(gradient(psi, 0.9, kind, kern, E2), h).real
            worst = max(worst, abs(an - fd) / abs(fd))
            gp = gradient(psi + k * t, 0.9, kind, kern, E2)
            gm = gradient(psi - k * t, 0.9, kind, kern, E2)
            fd2 = 2 * l2_inner(gp - gm, h).real / (2 * t)
            d2 = hessian_form(psi, h, k, 0.9, kind, kern, E2)
            worst = max(worst, abs(d2 - fd2) / abs(fd2))
    dt = time.perf_counter() - t0
    report(3, worst < 1e-5 and dt < 120, f"worst relative FD mismatch {worst:.2e} in {dt:.1f}s")


def test_criterion_4_inequality_suite(report):
    t0 = time.perf_counter()
    reps = inequality_suite(range(100))
    bad = failures(reps)
    dt = time.perf_counter() - t0
    names = sorted({r.name for r in reps})
    detail = f"{len(reps) - len(bad)}/{len(reps)} checks passed ({', '.join(names)}) in {dt:.0f}s"
    if bad:
        detail += f"; first failure {bad[0].name} [{bad[0].provenance}]"
    report(4, not bad and dt < 300, detail)


def test_criterion_5_fiber_certification(report):
    t0 = time.perf_counter()
    g = GridSpec(48, 60.0)
    kern = build_kernel(g)
    v = np.zeros((2, *g.shape), complex)
    v[0] = gaussian(g, 2.0)
    w = embed_two_spinor(Field(v, g), MD)
    res = maximize(w, 1.0, MD, kern, E2)
    props = res.property_report
    conc = certify_concavity(res, 1.0, MD, kern, E2, num_probes=100, seed=0)
    uniq = uniqueness_probe(res, 1.0, MD, kern, E2, starts=5, seed=0)
    bad = failures(props + conc + uniq)
    dt = time.perf_counter() - t0
    ok = res.converged and not bad and dt < 600
    report(
        5,
        ok,
        f"{len(props)} bounds, {len(conc)} concavity probes, {len(uniq)} multistart checks; "
        f"{len(bad)} violations; omega={res.omega:.9f}; {dt:.0f}s",
    )


def test_criterion_6_md_solve(report, md_solution):
    res = md_solution
    lower = 1 - E2 * GAMMA_KATO / 2
    tab = trial_upper_bound(gaussian_profile(res.config.grid, 1.0), 1.0, E2, np.linspace(0.1, 2.0, 20), solution_e=res.energy_e)
    accepted = [r for r in tab.rows if r.accepted]
    cp = check_critical_point_characterization(res.psi, 1.0, MD, E2)
    ok = (
        res.converged
        and res.residual <= 1e-6
        and 0 < res.omega < 1
        and lower < res.energy_e < 1
        and res.excess < 0
        and accepted
        and tab.all_dominate
        and not failures(cp)
        and res.wall_time < 3600
    )
    report(
        6,
        ok,
        f"e(1)-1={res.excess:.6e}, omega={res.omega:.9f}, residual={res.residual:.2e}, "
        f"{len(accepted)} trial bounds dominate, critical-point checks {len(cp) - len(failures(cp))}/{len(cp)}, "
        f"{res.iterations} outer its, {res.wall_time:.0f}s",
    )


def _cd_report(res, oracle):
    binding = -res.excess
    return binding, abs(binding - oracle) / oracle


def test_criterion_7_cd_solve(report):
    res = minimize(SolveConfig(model=CD, m=1.0, e2=E2, n=64, l=60.0))
    oracle = E2**2 * choquard_constant()
    binding, rel = _cd_report(res, oracle)
    ok = res.converged and 0 < res.energy_E < 1 and rel <= 0.25
    report(
        7,
        ok,
        f"converged={res.converged}, E={res.energy_E:.10f}, 1-e={binding:.4e} vs e^4 C={oracle:.4e} "
        f"(ratio {binding / oracle:.3f}, rel err {rel:.2f})",
    )


def test_criterion_7_large_box_nonrelativistic_limit(report):
    # the soliton width at this coupling exceeds a 60-unit box; a 240-unit box resolves it
    res = minimize(SolveConfig(model=CD, m=1.0, e2=E2, n=48, l=240.0, sigma0=20.0))
    oracle = E2**2 * choquard_constant()
    binding, rel = _cd_report(res, oracle)
    ok = res.converged and 0 < res.energy_E < 1 and rel <= 0.25
    report("7 (l=240 box)", ok, f"1-e={binding:.4e} vs e^4 C={oracle:.4e} (ratio {binding / oracle:.3f})")


def test_criterion_8_subadditivity(report):
    t0 = time.perf_counter()
    sw = sweep(SolveConfig(model=MD, e2=E2, n=64, l=60.0), [0.25, 0.5, 1.0], keep_results=False)
    free = sweep(SolveConfig(model=MD, e2=0.0, n=64, l=60.0), [0.25, 0.5, 1.0], keep_results=False)
    by_m = {r.m: r for r in sw.rows}
    margin = 2 * by_m[0.5].E_m - by_m[1.0].E_m
    free_err = max(abs(r.E_m - r.m) for r in free.rows)
    flagged = free.free_case and any("non-strict (free case)" in n for n in free.notes)
    dt = time.perf_counter() - t0
    ok = (
        not sw.partial
        and all(c.passed for c in sw.checks)
        and margin > 0
        and free_err <= 1e-10
        and flagged
        and all(c.passed for c in free.checks)
        and dt < 3 * 3600
    )
    ratios = ", ".join(f"E({r.m:g})/m-1={r.excess:.4e}" for r in sw.rows)
    report(8, ok, f"{ratios}; 2E(0.5)-E(1)={margin:.3e}; free max|E-m|={free_err:.1e} flagged={flagged}; {dt:.0f}s")


def test_criterion_9_determinism_and_mesh(report, md_solution):
    cfg48 = SolveConfig(model=MD, m=1.0, e2=E2, n=48, l=60.0, seed=7)
    a, b = minimize(cfg48), minimize(cfg48)
    repro = abs(a.energy_E - b.energy_E)
    change = abs(a.energy_e - md_solution.energy_e) / md_solution.energy_e
    ok = repro <= 1e-12 and change < 1e-3
    report(9, ok, f"rerun |dE|={repro:.1e}; e(1) relative change n=48->64: {change:.2e}")
