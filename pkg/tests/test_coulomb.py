import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from dirac_solitary.coulomb import (
    AnalyticConstants,
    build_kernel,
    coulomb_bilinear,
    coulomb_potential,
    current,
    density,
    interaction_energy,
    potentials,
)
from dirac_solitary.dirac import ModelKind
from dirac_solitary.grid import Field, GridSpec, gaussian, random_field, random_localized_field

from oracles import direct_bilinear, explicit_density_current, periodic_kernel_table, radial_coulomb_self_energy


def _gauss_density(g, sigma, center=(0.0, 0.0, 0.0)):
    return Field(gaussian(g, sigma, center) ** 2 + 0j, g)


@pytest.mark.parametrize("variant", ["truncated", "plain"])
def test_kernel_table(variant):
    g = GridSpec(16, 20.0)
    k = build_kernel(g, variant)
    assert np.all(np.isfinite(k.table)) and np.all(k.table >= 0)
    assert k.half_table.shape == (16, 16, 9)
    assert not k.table.flags.writeable
    with pytest.raises(ValueError):
        build_kernel(g, "yukawa")


def test_truncated_zero_mode():
    g = GridSpec(16, 20.0)
    assert build_kernel(g).table[0, 0, 0] == pytest.approx(2 * np.pi * 10.0**2)


@given(seed=st.integers(0, 2**32 - 1))
def test_density_and_current(seed):
    g = GridSpec(8, 6.0)
    psi = random_field(g, 4, np.random.default_rng(seed))
    rho = density(psi).values[0]
    J = current(psi).values
    rho_ref, J_ref = explicit_density_current(psi.values)
    np.testing.assert_allclose(rho, rho_ref, atol=1e-12 * rho.max())
    np.testing.assert_allclose(J, J_ref, atol=1e-12 * rho.max())
    assert np.all(np.sqrt(np.sum(J**2, axis=0)) <= rho * (1 + 1e-12))
    assert rho.sum() * g.w_x == pytest.approx(1.0, rel=1e-12)


def test_upper_spinor_has_no_current(rng):
    g = GridSpec(8, 6.0)
    psi = random_field(g, 4, rng)
    psi.values[2:] = 0
    assert np.abs(current(psi).values).max() == 0.0


def test_potential_of_zero_is_zero():
    g = GridSpec(16, 20.0)
    assert np.abs(coulomb_potential(Field(np.zeros(g.shape), g), build_kernel(g)).values).max() == 0.0


def test_gaussian_potential_matches_erf():
    g = GridSpec(64, 60.0)
    sigma = 1.5
    V = coulomb_potential(_gauss_density(g, sigma), build_kernel(g)).values[0]
    r = g.radius()
    inside = (r > 0) & (r < g.l / 4)
    exact = erf(r[inside] / (sigma * np.sqrt(2))) / r[inside]
    np.testing.assert_allclose(V[inside], exact, rtol=1e-2)
    c = g.n // 2
    assert V[c, c, c] == pytest.approx(np.sqrt(2 / np.pi) / sigma, rel=1e-2)


def test_gaussian_self_energy_closed_form():
    g = GridSpec(64, 60.0)
    sigma = 2.0
    rho = _gauss_density(g, sigma)
    assert coulomb_bilinear(rho, rho, build_kernel(g)) == pytest.approx(1 / (sigma * np.sqrt(np.pi)), rel=1e-2)


def test_gaussian_self_energy_radial_oracle():
    g = GridSpec(64, 60.0)
    sigma = 2.0
    rho = _gauss_density(g, sigma)
    dens = lambda r: (2 * np.pi * sigma**2) ** -1.5 * math.exp(-r * r / (2 * sigma**2))
    ref = radial_coulomb_self_energy(dens, 12 * sigma)
    assert ref == pytest.approx(1 / (sigma * np.sqrt(np.pi)), rel=1e-8)
    assert coulomb_bilinear(rho, rho, build_kernel(g)) == pytest.approx(ref, rel=1e-2)


def test_separated_gaussians_interact_like_points():
    g = GridSpec(64, 60.0)
    d = 10.0
    a = _gauss_density(g, 1.0, (-d / 2, 0, 0))
    b = _gauss_density(g, 1.0, (d / 2, 0, 0))
    assert coulomb_bilinear(a, b, build_kernel(g)) == pytest.approx(1 / d, rel=1e-3)


@pytest.mark.parametrize("variant", ["truncated", "plain"])
def test_direct_double_sum_oracle(variant):
    g = GridSpec(8, 6.0)
    kern = build_kernel(g, variant)
    G = periodic_kernel_table(g, kern.table)
    rng = np.random.default_rng(7)
    f = rng.standard_normal(g.shape)
    h = rng.standard_normal(g.shape)
    ref = direct_bilinear(g, G, f, h)
    got = coulomb_bilinear(Field(f + 0j, g), Field(h + 0j, g), kern)
    assert got == pytest.approx(ref, rel=1e-8)


@given(seed=st.integers(0, 2**32 - 1))
def test_bilinear_symmetric_and_positive(seed):
    g = GridSpec(8, 6.0)
    rng = np.random.default_rng(seed)
    f, h = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    kern = build_kernel(g)
    F, H = Field(f + 0j, g), Field(h + 0j, g)
    assert coulomb_bilinear(F, H, kern) == pytest.approx(coulomb_bilinear(H, F, kern), rel=1e-12)
    assert coulomb_bilinear(F, F, kern) >= 0


def test_interaction_energy_models():
    g = GridSpec(32, 40.0)
    psi = random_localized_field(g, 4, np.random.default_rng(3), width=3.0)
    kern = build_kernel(g)
    q_md = interaction_energy(psi, ModelKind.MAXWELL_DIRAC, kern)
    q_cd = interaction_energy(psi, ModelKind.COULOMB_DIRAC, kern)
    rho = density(psi)
    assert q_cd == pytest.approx(coulomb_bilinear(rho, rho, kern), rel=1e-10)
    assert 0 <= q_md <= q_cd


def test_potentials_sign_and_scale():
    g = GridSpec(32, 40.0)
    psi = random_localized_field(g, 4, np.random.default_rng(4), width=3.0)
    kern = build_kernel(g)
    a0, a = potentials(psi, kern, 0.04)
    ref = coulomb_potential(density(psi), kern).values[0]
    np.testing.assert_allclose(a0.values[0], -0.2 * ref, atol=1e-14)
    assert a.ncomp == 3


def test_small_coupling_flag():
    assert AnalyticConstants(e2=0.06).is_small_coupling()
    assert not AnalyticConstants(e2=0.08).is_small_coupling()


def test_kernel_exchange_changes_gaussian_self_energy_little():
    g = GridSpec(64, 60.0)
    rho = _gauss_density(g, g.l / 16)
    bt = coulomb_bilinear(rho, rho, build_kernel(g, "truncated"))
    bp = coulomb_bilinear(rho, rho, build_kernel(g, "plain"))
    assert abs(bp - bt) / bt < 1e-2


@pytest.mark.parametrize("sigma", [1.0, 2.0, 3.75])
def test_plain_kernel_neutralization_shift(sigma):
    # periodic Coulomb energy with a neutralizing background: -xi/l + 4 pi sigma^2 / l^3
    # relative to free space, xi the simple-cubic Madelung constant
    xi = 2.837297479
    g = GridSpec(64, 60.0)
    rho = _gauss_density(g, sigma)
    bt = coulomb_bilinear(rho, rho, build_kernel(g, "truncated"))
    bp = coulomb_bilinear(rho, rho, build_kernel(g, "plain"))
    expect = -xi / g.l + 4 * np.pi * sigma**2 / g.l**3
    assert bp - bt == pytest.approx(expect, rel=1e-3)
