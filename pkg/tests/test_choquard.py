import math

import numpy as np
import pytest

from dirac_solitary.choquard import choquard_constant, choquard_profile, nonrelativistic_binding
from dirac_solitary.coulomb import build_kernel, coulomb_bilinear
from dirac_solitary.grid import Field, GridSpec, gaussian


def test_constant_value():
    # twice the Lieb ground-state constant 0.10851
    assert choquard_constant() == pytest.approx(0.2170256, rel=1e-5)


def test_virial_identity():
    prof = choquard_profile()
    # the ground state satisfies B(u^2, u^2) = 4 ||grad u||^2 in this normalization
    assert prof.coulomb == pytest.approx(4 * prof.kinetic, rel=1e-6)
    assert prof.u0_shift > 0 and prof.mass > 0


def test_gaussian_trial_stays_below_supremum():
    g = GridSpec(64, 60.0)
    sigma = 2.0
    rho = Field(gaussian(g, sigma) ** 2 + 0j, g)
    B = coulomb_bilinear(rho, rho, build_kernel(g))
    K = 3 / (4 * sigma**2)
    ratio = B**2 / (2 * K)
    assert ratio < choquard_constant()
    assert ratio > 0.9 * choquard_constant()  # Gaussians are close to optimal
    assert ratio == pytest.approx(2 / (3 * math.pi), rel=1e-2)


def test_binding_scaling():
    base = nonrelativistic_binding(0.06)
    assert base == pytest.approx(0.06**2 * choquard_constant())
    assert nonrelativistic_binding(0.06, m=0.5) == pytest.approx(base / 4)
    assert nonrelativistic_binding(0.06, prefactor_per_e2=0.5) == pytest.approx(base / 4)
