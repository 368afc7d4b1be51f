import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from frbnet.spectral import (dft2, dft2_direct, hermitian_error, idft2_real, make_freq_grid,
                             symmetrize_real_grid)


def loop_dft(p):
    """Plain-Python double sum, kept independent of numpy's FFT."""
    h, w = len(p), len(p[0])
    out = [[0j] * w for _ in range(h)]
    for u in range(h):
        for v in range(w):
            acc = 0j
            for y in range(h):
                for x in range(w):
                    acc += p[y][x] * cmath.exp(-2j * math.pi * (u * y / h + v * x / w))
            out[u][v] = acc / (h * w)
    return np.array(out)


def test_constant_plane_has_only_dc():
    s = dft2(np.full((4, 4), 0.5))
    assert s[0, 0] == pytest.approx(0.5 + 0j, abs=1e-12)
    rest = np.abs(s).copy()
    rest[0, 0] = 0
    assert rest.max() < 1e-12


def test_impulse_has_flat_spectrum():
    p = np.zeros((4, 4))
    p[0, 0] = 1.0
    np.testing.assert_allclose(dft2(p), np.full((4, 4), 1 / 16), atol=1e-15)


def test_matches_loop_oracle_seed42():
    p = np.random.default_rng(42).standard_normal((8, 8))
    assert np.max(np.abs(dft2(p) - loop_dft(p.tolist()))) < 1e-10


def test_direct_reference_matches_loop_oracle():
    p = np.random.default_rng(1).standard_normal((4, 6))
    assert np.max(np.abs(dft2_direct(p) - loop_dft(p.tolist()))) < 1e-12


@pytest.mark.parametrize("h", [4, 8, 16])
@pytest.mark.parametrize("w", [4, 8, 16])
def test_oracle_equivalence_all_sizes(h, w):
    p = np.random.default_rng(h * 100 + w).uniform(-1, 1, (h, w))
    assert np.max(np.abs(dft2(p) - dft2_direct(p))) < 1e-10


def test_dc_is_mean():
    p = np.random.default_rng(0).uniform(size=(6, 10))
    assert dft2(p)[0, 0].real == pytest.approx(p.mean(), abs=1e-15)


def test_non_finite_input_names_index():
    p = np.zeros((4, 4))
    p[2, 3] = np.nan
    with pytest.raises(ValueError, match=r"\(2, 3\)"):
        dft2(p)


def test_roundtrip_seed7():
    p = np.random.default_rng(7).standard_normal((16, 16))
    back, resid = idft2_real(dft2(p))
    assert np.max(np.abs(back - p)) < 1e-9
    assert resid < 1e-9


def test_single_non_hermitian_bin_gives_proportional_residual():
    p = np.random.default_rng(2).standard_normal((16, 16))
    base = dft2(p)
    resid = []
    for m in (1e-3, 2e-3, 4e-3):
        s = base.copy()
        s[0, 1] += m
        resid.append(idft2_real(s)[1])
    assert all(r > 0 for r in resid)
    # a lone bin m at (0, 1) contributes m * sin(2 pi x / 16), peak m
    np.testing.assert_allclose(resid, [1e-3, 2e-3, 4e-3], rtol=1e-9)


def test_freq_grid_examples():
    g = make_freq_grid(4, 4)
    assert (g.u[0, 0], g.v[0, 0], g.r[0, 0]) == (0.0, 0.0, 0.0)
    assert g.u[2, 2] == -0.5 and g.v[2, 2] == -0.5
    assert g.r[2, 2] == pytest.approx(1.0, abs=1e-15)
    g8 = make_freq_grid(8, 8)
    assert g8.u[0, 2] == 0.0 and g8.v[0, 2] == 0.25
    assert g8.r[0, 2] == pytest.approx(0.25 / math.sqrt(0.5), abs=1e-12)
    assert g8.theta[0, 2] == pytest.approx(math.atan(0.25 / 1e-8), abs=1e-15)
    assert g8.theta[0, 2] == pytest.approx(math.pi / 2, abs=1e-7)


def test_freq_grid_ranges_and_index_map():
    g = make_freq_grid(5, 8)
    assert g.r.max() <= 1.0
    np.testing.assert_array_equal(g.u[:, 0], [0, 0.2, 0.4, -0.4, -0.2])
    np.testing.assert_array_equal(g.v[0], [0, 0.125, 0.25, 0.375, -0.5, -0.375, -0.25, -0.125])
    assert np.all(np.abs(g.theta) < math.pi / 2)


def test_freq_grid_rejects_small_dims():
    with pytest.raises(ValueError):
        make_freq_grid(1, 4)


def test_symmetrize_examples():
    sym = np.arange(16.0).reshape(4, 4)
    sym = symmetrize_real_grid(sym)
    assert np.array_equal(symmetrize_real_grid(sym), sym)
    g = np.zeros((4, 4))
    g[0, 1] = 1.0
    out = symmetrize_real_grid(g)
    assert out[0, 1] == 0.5 and out[0, 3] == 0.5
    assert out.sum() == 1.0


def test_symmetrize_idempotent_seed3():
    g = np.random.default_rng(3).standard_normal((8, 6))
    once = symmetrize_real_grid(g)
    np.testing.assert_array_equal(symmetrize_real_grid(once), once)


def test_symmetric_gain_keeps_spectrum_hermitian():
    rng = np.random.default_rng(4)
    spec = dft2(rng.standard_normal((8, 8)))
    gain = symmetrize_real_grid(rng.standard_normal((8, 8)))
    assert hermitian_error(spec * gain) < 1e-15
    assert idft2_real(spec * gain)[1] < 1e-12


planes = arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(2, 12)),
                elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=50, deadline=None)
@given(planes)
def test_roundtrip_property(p):
    back, _ = idft2_real(dft2(p))
    assert np.max(np.abs(back - p)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(planes, st.floats(-3, 3), st.floats(-3, 3))
def test_linearity_property(p, a, b):
    q = np.cos(np.arange(p.size).reshape(p.shape))
    lhs = dft2(a * p + b * q)
    rhs = a * dft2(p) + b * dft2(q)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(planes)
def test_parseval_property(p):
    h, w = p.shape
    energy = np.sum(p**2)
    spec_energy = h * w * np.sum(np.abs(dft2(p)) ** 2)
    assert spec_energy == pytest.approx(energy, rel=1e-9, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(planes)
def test_real_plane_spectrum_is_hermitian(p):
    assert hermitian_error(dft2(p)) < 1e-9
