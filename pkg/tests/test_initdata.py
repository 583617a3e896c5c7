import numpy as np
import pytest
from hypothesis import given, strategies as st

from bhlab.errors import GridTooSmall
from bhlab.grid import Grid1D, local_jet
from bhlab.initdata import (InitConfig, build_initial_physical, build_initial_selfsim,
                            chi_eval, datum_origin_jet, envelope_l2_bound,
                            parameter_direction, shooting_start, validate_initial)


@pytest.fixture(scope="module")
def grid():
    return Grid1D.symmetric(2.0, 2 ** 13)


def test_config_validation():
    with pytest.raises(ValueError):
        InitConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        InitConfig(alpha=0.2)
    with pytest.raises(ValueError):
        InitConfig(uhat="bump", uhat_amplitude=0.5)
    cfg = InitConfig(epsilon=0.1)
    assert cfg.s0 == pytest.approx(np.log(10.0))
    assert cfg.with_params(0.01, -0.02).beta == -0.02


@given(st.floats(-3.0, 3.0), st.sampled_from(["mollified", "smoothstep"]))
def test_cutoff_shape(X, kind):
    c = chi_eval(X, kind)
    assert 0.0 <= c <= 1.0
    assert c == chi_eval(-X, kind)
    if abs(X) <= 1.0:
        assert c == 1.0
    if abs(X) >= 2.0:
        assert c == 0.0


def test_cutoff_monotone():
    y = np.linspace(1.0, 2.0, 501)
    for kind in ("mollified", "smoothstep"):
        assert np.all(np.diff(chi_eval(y, kind)) <= 1e-15)


def test_origin_jet_of_datum(grid):
    cfg = InitConfig(alpha=0.03, beta=-0.02, uhat="bump", uhat_amplitude=0.05)
    u0 = build_initial_physical(cfg, grid)
    # orders above 3 are under-resolved without the jet filter at this size
    jx = local_jet(u0, 0.0, 3)
    scale = cfg.epsilon ** (cfg.amp_exponent - cfg.space_exponent * np.arange(4))
    err = np.abs(jx / scale - datum_origin_jet(cfg)[:4])
    assert np.all(err <= [1e-12, 1e-8, 1e-6, 1e-3])
    assert shooting_start(cfg) == (-0.025, pytest.approx(-0.05 / 6))


def test_support_and_grid_guard(grid):
    u0 = build_initial_physical(InitConfig(), grid)
    assert np.all(u0.values[np.abs(grid.x) >= 1.0] == 0.0)
    with pytest.raises(GridTooSmall):
        build_initial_physical(InitConfig(), Grid1D.symmetric(1.0, 256))
    with pytest.raises(GridTooSmall):
        build_initial_selfsim(InitConfig(), Grid1D.symmetric(5.0, 256))


def test_parameter_direction_is_derivative(grid):
    cfg = InitConfig()
    h = 1e-3
    for which, shift in (("alpha", (h, 0.0)), ("beta", (0.0, h))):
        up = build_initial_physical(cfg.with_params(*shift), grid).values
        um = build_initial_physical(cfg.with_params(-shift[0], -shift[1]), grid).values
        fd = (up - um) / (2 * h)
        d = parameter_direction(cfg, grid, which).values
        assert np.max(np.abs(fd - d)) <= 1e-8 * np.max(np.abs(d))


def test_validation_passes_for_standard_datum(grid):
    cfg = InitConfig()
    rep = validate_initial(cfg, build_initial_physical(cfg, grid))
    assert rep.passed, rep.failures()
    assert set(rep.as_dict()) == {c.name for c in rep.checks}


def test_validation_flags_large_kappa(grid):
    cfg = InitConfig(kappa0=5.0)
    rep = validate_initial(cfg, build_initial_physical(cfg, grid))
    assert "far |uhat'| <= eps/2" in {c.name for c in rep.failures()}


def test_envelope_bound():
    assert envelope_l2_bound() == pytest.approx(2.2555, abs=1e-3)
