import numpy as np
import pytest

from bhlab.errors import NonFiniteInput, RadiusTooSmall, SupportTooWide
from bhlab.grid import Field, Grid1D, sample
from bhlab.hilbert import (HilbertMethod, apply_hilbert, cross_validate, gaussian_dd,
                           hilbert_gaussian_dd, hilbert_multiplier, hilbert_padded_line,
                           hilbert_pv_point, hilbert_spectral, lorentzian_pair_exact,
                           windowed_lorentzian)


def test_multiplier_zeroes_mean_and_nyquist():
    m = hilbert_multiplier(16)
    assert m[0] == 0 and m[-1] == 0 and np.all(m[1:-1] == -1j)


def test_sine_to_minus_cosine():
    g = Grid1D(-np.pi, np.pi, 64)
    for k in (1, 5, 20):
        h = hilbert_spectral(sample(g, lambda x: np.sin(k * x)))
        assert np.max(np.abs(h.values + np.cos(k * g.x))) < 1e-12


def test_double_application_is_minus_identity(rng):
    g = Grid1D(0.0, 2 * np.pi, 128)
    fh = np.fft.rfft(rng.standard_normal(128))
    fh[[0, -1]] = 0.0
    f = Field(g, np.fft.irfft(fh, 128))
    assert np.max(np.abs(hilbert_spectral(hilbert_spectral(f)).values + f.values)) < 1e-12


def test_spectral_rejects_nonfinite():
    g = Grid1D(0.0, 1.0, 16)
    f = Field(g, np.zeros(16))
    object.__setattr__(f, "values", np.full(16, np.inf))
    with pytest.raises(NonFiniteInput):
        hilbert_spectral(f)


def test_padded_lorentzian():
    g = Grid1D(-120.0, 120.0, 2 ** 13)
    h = hilbert_padded_line(windowed_lorentzian(g), 8)
    core = np.abs(g.x) <= 5.0
    exact = lorentzian_pair_exact(g.x[core])
    assert np.max(np.abs(h.values[core] - exact)) / np.max(np.abs(exact)) < 1e-4


def test_padded_support_guard():
    g = Grid1D.symmetric(1.0, 64)
    with pytest.raises(SupportTooWide):
        hilbert_padded_line(Field(g, np.ones(64)), 2)
    with pytest.raises(ValueError):
        hilbert_padded_line(Field(g, np.zeros(64)), 1)


def test_pv_point_matches_closed_form():
    g = Grid1D.symmetric(16.0, 4096)
    f = Field(g, gaussian_dd(g.x))
    for x in (-1.3, 0.0, 0.4, 2.5):
        assert hilbert_pv_point(f, x) == pytest.approx(hilbert_gaussian_dd(x), abs=1e-6)


def test_pv_radius_guard():
    g = Grid1D.symmetric(16.0, 256)
    with pytest.raises(RadiusTooSmall):
        hilbert_pv_point(Field(g, gaussian_dd(g.x)), 0.0, near_radius=g.spacing)


def test_method_validation_and_dispatch():
    with pytest.raises(ValueError):
        HilbertMethod("fancy")
    with pytest.raises(ValueError):
        HilbertMethod("padded", pad_factor=1)
    g = Grid1D(0.0, 2 * np.pi, 32)
    f = sample(g, np.sin)
    assert np.all(apply_hilbert(f, HilbertMethod("none")).values == 0.0)
    assert np.allclose(apply_hilbert(f, HilbertMethod()).values, -np.cos(g.x))


def test_cross_validate_rows_pass():
    rows = cross_validate(n_points=2048, n_probe=8)
    assert len(rows) == 5
    for name, err, tol in rows:
        assert err <= tol, name
