import numpy as np
import pytest

from semiphase import SpatialGrid, forward_spectral, inverse_spectral, l2_norm_sq


def test_gaussian_fourier_pair():
    g = SpatialGrid.create(1, 512, 12.0)
    (x,) = g.meshes()
    f = np.exp(-(x ** 2) / 2).astype(complex)
    c = forward_spectral(g, f)
    k = g.wavenumber_axis(0, ordered=True)
    assert np.max(np.abs(c - np.exp(-(k ** 2) / 2))) <= 1e-10


def test_zero_field_zero_coefficients():
    g = SpatialGrid.create(1, 64, 4.0)
    c = forward_spectral(g, np.zeros(64, dtype=complex))
    assert np.all(c == 0)


def test_round_trip_identity():
    rng = np.random.default_rng(7)
    g = SpatialGrid.create(2, (64, 32), (3.0, 2.0))
    f = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    back = inverse_spectral(g, forward_spectral(g, f))
    assert np.max(np.abs(back - f)) / np.max(np.abs(f)) <= 1e-12


def test_parseval():
    rng = np.random.default_rng(3)
    g = SpatialGrid.create(1, 256, 5.0)
    f = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    c = forward_spectral(g, f)
    dk = np.pi / g.half_extent[0]
    lhs = l2_norm_sq(g, f)
    rhs = float(np.sum(np.abs(c) ** 2) * dk)
    assert abs(lhs - rhs) <= 1e-12 * lhs


def test_dual_grid_self_consistent():
    g = SpatialGrid.create(1, 128, 4.0)
    k = g.wavenumber_axis(0, ordered=True)
    expected = np.pi * np.arange(-64, 64) / 4.0
    assert np.allclose(k, expected)


def test_off_center_grid_axes():
    g = SpatialGrid.create(2, (8, 8), 0.5, center=(1.0, -2.0))
    assert g.axis(0)[0] == pytest.approx(0.5)
    assert g.axis(1)[0] == pytest.approx(-2.5)
    # transform magnitudes are center-independent
    rng = np.random.default_rng(0)
    f = rng.standard_normal(g.shape) + 0j
    g0 = SpatialGrid.create(2, (8, 8), 0.5)
    assert np.allclose(np.abs(forward_spectral(g, f)), np.abs(forward_spectral(g0, f)))


def test_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        SpatialGrid.create(1, 100, 4.0)


def test_finite_values_required():
    g = SpatialGrid.create(1, 64, 4.0)
    bad = np.zeros(64, dtype=complex)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        forward_spectral(g, bad)
