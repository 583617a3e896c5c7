import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhlab.errors import NonFiniteInput, OrderOutOfRange, PointOutsideGrid
from bhlab.grid import (Field, Grid1D, dealias, fourier_eval, local_jet, read_field_csv,
                        sample, spectral_derivative, support_radius, write_field_csv)


@pytest.fixture
def periodic():
    return Grid1D(0.0, 2 * np.pi, 64)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 100)
    with pytest.raises(ValueError):
        Grid1D(1.0, 0.0, 64)
    g = Grid1D.symmetric(2.0, 128)
    assert g.spacing == pytest.approx(4.0 / 128)
    assert g.x[0] == -2.0 and g.x[-1] < 2.0
    assert g.dealias_mask().sum() == g.dealias_cutoff + 1


def test_field_rejects_bad_values(periodic):
    with pytest.raises(NonFiniteInput):
        Field(periodic, np.full(64, np.nan))
    with pytest.raises(ValueError):
        Field(periodic, np.zeros(10))
    f = Field(periodic, np.zeros(64))
    with pytest.raises(ValueError):
        f.values[0] = 1.0


@given(st.integers(1, 9))
def test_derivative_of_sine(order):
    g = Grid1D(0.0, 2 * np.pi, 64)
    f = sample(g, lambda x: np.sin(3 * x))
    d = spectral_derivative(f, order).values
    exact = 3.0 ** order * np.sin(3 * g.x + order * np.pi / 2)
    # roundoff is amplified by k_max^order
    assert np.max(np.abs(d - exact)) <= 1e-14 * 32.0 ** order


def test_derivative_order_range(periodic):
    f = sample(periodic, np.sin)
    with pytest.raises(OrderOutOfRange):
        spectral_derivative(f, 0)
    with pytest.raises(OrderOutOfRange):
        spectral_derivative(f, 10)


def test_dealias_keeps_low_modes(periodic):
    low = np.sin(2 * periodic.x)
    high = np.cos(30 * periodic.x)
    out = dealias(Field(periodic, low + high)).values
    assert np.allclose(out, low, atol=1e-13)


@settings(max_examples=25)
@given(st.floats(-1.5, 1.5))
def test_local_jet_of_gaussian(x0):
    g = Grid1D.symmetric(10.0, 512)
    f = sample(g, lambda x: np.exp(-x ** 2))
    jet = local_jet(f, x0, 3)
    e = np.exp(-x0 ** 2)
    exact = [e, -2 * x0 * e, (4 * x0 ** 2 - 2) * e, (-8 * x0 ** 3 + 12 * x0) * e]
    assert np.allclose(jet, exact, atol=1e-10)


def test_local_jet_outside_grid(periodic):
    with pytest.raises(PointOutsideGrid):
        local_jet(sample(periodic, np.sin), 10.0, 1)


def test_fourier_eval_matches_nodes_and_derivative():
    g = Grid1D.symmetric(10.0, 256)
    f = sample(g, lambda x: np.exp(-x ** 2))
    fh = f.hat()
    assert np.allclose(fourier_eval(fh, g, g.x[::17]), f.values[::17], atol=1e-14)
    pts = np.array([-0.3, 0.1, 0.77])
    assert np.allclose(fourier_eval(fh, g, pts, order=1), -2 * pts * np.exp(-pts ** 2),
                       atol=1e-10)


def test_support_radius():
    g = Grid1D.symmetric(4.0, 256)
    f = Field(g, np.where(np.abs(g.x) <= 1.0, 1.0, 0.0))
    assert support_radius(f) == pytest.approx(1.0, abs=g.spacing)
    assert support_radius(Field(g, np.zeros(256))) == 0.0


def test_csv_roundtrip(tmp_path, rng):
    g = Grid1D(-1.0, 3.0, 32)
    f = Field(g, rng.standard_normal(32), label="noise field", time=0.25)
    write_field_csv(tmp_path / "f.csv", f)
    back = read_field_csv(tmp_path / "f.csv")
    assert back.grid == g and back.label == "noise field" and back.time == 0.25
    assert np.array_equal(back.values, f.values)


def test_norms_and_arithmetic(periodic):
    f = sample(periodic, np.sin)
    assert f.l2_norm() == pytest.approx(np.sqrt(np.pi))
    assert (f + f).sup_norm() == pytest.approx(2 * f.sup_norm())
    assert (f - f).sup_norm() == 0.0
