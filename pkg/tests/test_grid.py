import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirac_solitary.grid import (
    Field,
    GridMismatchError,
    GridSpec,
    l2_inner,
    load_field,
    random_field,
    save_field,
    sobolev_inner,
    sobolev_norm2,
    transform,
)


def test_quadrature_weights():
    g = GridSpec(16, 12.0)
    assert g.w_x * g.n**3 == pytest.approx(g.l**3)
    assert g.w_x * g.w_p * g.n**3 == pytest.approx((2 * np.pi) ** 3)


@pytest.mark.parametrize("n,l", [(7, 10.0), (6, 10.0), (16, 0.0), (16, -1.0)])
def test_grid_validation(n, l):
    with pytest.raises(ValueError):
        GridSpec(n, l)


def test_constant_field_is_zero_mode():
    g = GridSpec(8, 10.0)
    f = Field(np.full(g.shape, 2.0 + 0j), g).to("momentum")
    expect = 2.0 * g.l**3 * (2 * np.pi) ** -1.5
    assert f.values[0, 0, 0, 0] == pytest.approx(expect)
    rest = f.values.copy()
    rest[0, 0, 0, 0] = 0
    assert np.abs(rest).max() < 1e-12


def test_plane_wave_lands_on_its_node():
    g = GridSpec(8, 10.0)
    x, y, z = g.coordinates()
    k = (1, -2, 3)
    p = [2 * np.pi * ki / g.l for ki in k]
    f = Field(np.exp(1j * (p[0] * x + p[1] * y + p[2] * z)), g).to("momentum")
    idx = tuple(ki % g.n for ki in k)
    assert abs(f.values[(0, *idx)]) == pytest.approx(g.l**3 * (2 * np.pi) ** -1.5)
    assert f.values[(0, *idx)].imag == pytest.approx(0.0, abs=1e-10)
    assert np.sum(np.abs(f.values) ** 2) == pytest.approx(abs(f.values[(0, *idx)]) ** 2)


@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([8, 10, 16]), ncomp=st.sampled_from([1, 2, 4]))
def test_round_trip_and_parseval(seed, n, ncomp):
    g = GridSpec(n, 7.5)
    f = random_field(g, ncomp, np.random.default_rng(seed))
    fh = f.to("momentum")
    back = fh.to("position")
    assert np.max(np.abs(back.values - f.values)) < 1e-12
    assert l2_inner(fh, fh).real == pytest.approx(l2_inner(f, f).real, rel=1e-12)


def test_orthogonal_plane_waves():
    g = GridSpec(8, 10.0)
    x, y, z = g.coordinates()
    k = 2 * np.pi / g.l
    a = Field(np.exp(1j * k * x) * np.ones(g.shape), g)
    b = Field(np.exp(2j * k * y) * np.ones(g.shape), g)
    assert abs(l2_inner(a, b)) < 1e-10
    assert l2_inner(a, a).real == pytest.approx(g.l**3)


def test_inner_product_conjugate_linear_first_slot(rng):
    g = GridSpec(8, 5.0)
    f, h = random_field(g, 2, rng), random_field(g, 2, rng)
    assert l2_inner(f * 1j, h) == pytest.approx(-1j * l2_inner(f, h))
    assert l2_inner(f, h * 1j) == pytest.approx(1j * l2_inner(f, h))


def test_sobolev_weights(unit_momentum_grid):
    g = unit_momentum_grid
    const = Field(np.ones(g.shape, complex), g)
    assert sobolev_norm2(const, 0.5) == pytest.approx(l2_inner(const, const).real)
    x, y, z = g.coordinates()
    wave = Field(np.exp(1j * (x + y + z)), g)  # |p|^2 = 3, lambda^2 = 4
    l2 = l2_inner(wave, wave).real
    assert sobolev_norm2(wave, 0.5) == pytest.approx(2 * l2)
    assert sobolev_norm2(wave, 1.0) == pytest.approx(4 * l2)
    assert sobolev_norm2(wave, -0.5) == pytest.approx(0.5 * l2)


@given(seed=st.integers(0, 2**32 - 1))
def test_sobolev_ordering(seed):
    g = GridSpec(8, 6.0)
    f = random_field(g, 4, np.random.default_rng(seed))
    lo, mid, hi = sobolev_norm2(f, -0.5), l2_inner(f, f).real, sobolev_norm2(f, 0.5)
    assert lo <= mid * (1 + 1e-12) and mid <= hi * (1 + 1e-12)


def test_unsupported_exponent_and_mismatch(rng):
    g = GridSpec(8, 5.0)
    f = random_field(g, 1, rng)
    with pytest.raises(ValueError):
        sobolev_inner(f, f, 0.25)
    other = random_field(GridSpec(8, 6.0), 1, rng)
    with pytest.raises(GridMismatchError):
        l2_inner(f, other)
    with pytest.raises(GridMismatchError):
        l2_inner(f, f.to("momentum"))
    with pytest.raises(GridMismatchError):
        transform(f, "position")
    with pytest.raises(GridMismatchError):
        Field(np.zeros((2, 4, 4, 4)), g)


@pytest.mark.parametrize("rep", ["position", "momentum"])
def test_snapshot_round_trip(tmp_path, rng, rep):
    g = GridSpec(8, 9.0)
    f = random_field(g, 4, rng).to(rep)
    path = tmp_path / "f.dsol"
    save_field(path, f)
    raw = path.read_bytes()
    assert raw[:5] == b"DSOL1"
    assert len(raw) == 5 + 14 + 4 * 8**3 * 16
    g2 = load_field(path)
    assert g2.grid == g and g2.representation == rep
    assert np.array_equal(g2.values, f.values)


def test_snapshot_rejects_bad_files(tmp_path, rng):
    g = GridSpec(8, 9.0)
    path = tmp_path / "f.dsol"
    save_field(path, random_field(g, 2, rng))
    raw = path.read_bytes()
    (tmp_path / "bad.dsol").write_bytes(b"XXXXX" + raw[5:])
    with pytest.raises(ValueError, match="not a DSOL1"):
        load_field(tmp_path / "bad.dsol")
    (tmp_path / "short.dsol").write_bytes(raw[:-16])
    with pytest.raises(ValueError, match="payload"):
        load_field(tmp_path / "short.dsol")
