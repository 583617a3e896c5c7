import numpy as np
import pytest

from bhlab.errors import PositiveSlope, SmallFifthDerivative
from bhlab.grid import Field, Grid1D
from bhlab.initdata import InitConfig, build_initial_physical
from bhlab.profile import ui_eval
from bhlab.selfsim import (ModulationState, SelfSimilarFrame, exponents, extract_modulation,
                           from_selfsimilar, jet_scale, modulation_rhs, to_selfsimilar)


@pytest.fixture(scope="module")
def datum():
    cfg = InitConfig(epsilon=0.1)
    g = Grid1D.symmetric(2.0, 2 ** 13)
    return cfg, build_initial_physical(cfg, g)


def test_exponents():
    assert exponents(2) == (1.25, 0.25)
    assert exponents(1) == (1.5, 0.5)
    assert jet_scale(0.0)[3] == 1.0


def test_recovers_standard_modulation(datum):
    cfg, u = datum
    mod = extract_modulation(u, cfg.t0)
    assert abs(mod.tau) < 1e-12 and abs(mod.xi) < 1e-11 and abs(mod.kappa) < 1e-10
    assert mod.s == pytest.approx(cfg.s0)
    fr = to_selfsimilar(u, cfg.t0, mod)
    assert np.allclose(fr.origin_jet[:6], [0, -1, 0, 0, 0, 120], atol=1e-8)
    assert max(fr.constraint_residuals()) < 1e-10
    assert fr.nu_estimate == pytest.approx(120.0, rel=1e-9)


def test_shift_and_offset_are_tracked(datum):
    cfg, u = datum
    g = u.grid
    uh = np.fft.rfft(u.values) * np.exp(-1j * g.k * 0.01)
    moved = Field(g, np.fft.irfft(uh, g.n_points) + 0.3)
    mod = extract_modulation(moved, cfg.t0)
    assert mod.xi == pytest.approx(0.01, abs=1e-10)
    assert mod.kappa == pytest.approx(0.3, abs=1e-9)
    assert abs(mod.tau) < 1e-12


def test_amplitude_rescaling_moves_tau(datum):
    cfg, u = datum
    # same profile with tau - t = lam * eps
    lam = 1.5
    g = u.grid
    target = cfg.epsilon * lam
    vals = np.where(np.abs(g.x) < 1.0,
                    target ** 0.25 * ui_eval(g.x / target ** 1.25), 0.0)
    vals *= np.exp(-(g.x / 0.8) ** 40)
    mod = extract_modulation(Field(g, vals), cfg.t0)
    assert mod.tau - cfg.t0 == pytest.approx(target, rel=1e-9)


def test_increasing_field_rejected():
    g = Grid1D(0.0, 2 * np.pi, 64)
    with pytest.raises(PositiveSlope):
        extract_modulation(Field(g, np.zeros(64)), 0.0)


def test_window_roundtrip(datum):
    cfg, u = datum
    mod = extract_modulation(u, cfg.t0)
    fr = to_selfsimilar(u, cfg.t0, mod, X_grid=Grid1D.symmetric(4.0, 64))
    assert np.allclose(fr.U.values, ui_eval(fr.U.x), atol=1e-9)
    eps = cfg.epsilon
    x, v = from_selfsimilar(fr)
    assert np.allclose(v, eps ** 0.25 * ui_eval(x / eps ** 1.25), atol=1e-9)


def test_modulation_rhs_on_exact_profile():
    mod = ModulationState(t=-0.1, tau=0.0, xi=0.0, kappa=0.0)
    jet = np.array([0, -1, 0, 0, 0, 120, 0, 0, 0, 0], float)
    fr = SelfSimilarFrame(s=mod.s, mod=mod, origin_jet=jet)
    assert modulation_rhs(fr, (0.0, 0.0, 0.0)) == (0.0, 0.0, 0.0)
    tau_dot, xi_dot, kappa_dot = modulation_rhs(fr, (0.0, 0.5, 0.0))
    assert tau_dot == pytest.approx(np.exp(-mod.s) * 0.5)
    fr.origin_jet = jet * np.array([1, 1, 1, 1, 1, 0.01, 1, 1, 1, 1])
    with pytest.raises(SmallFifthDerivative):
        modulation_rhs(fr, (0.0, 0.0, 0.0))
