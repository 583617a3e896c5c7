from math import factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bhlab.errors import NonPositiveNu, XTooSmall
from bhlab.profile import (derivative_polynomials, ode_residual, u2_asymptotic,
                           u2_bound_certificates, u2_nu_derivatives, u2_nu_eval,
                           ui_derivatives, ui_eval)


@given(st.integers(1, 4), st.floats(-1e6, 1e6))
def test_implicit_equation(i, X):
    U = ui_eval(X, i)
    assert abs(X + U + U ** (2 * i + 1)) <= 1e-12 * (1 + abs(X))


def test_odd_and_decreasing():
    X = np.linspace(-50, 50, 1001)
    for i in range(1, 5):
        U = ui_eval(X, i)
        assert np.allclose(U, -ui_eval(-X, i), atol=0)
        assert np.all(np.diff(U) < 0)


def test_taylor_coefficients_at_origin():
    # U = -X + X^p - p X^(2p-1) + ... from series reversion of X = -U - U^p
    for i in range(1, 5):
        p = 2 * i + 1
        d = ui_derivatives(0.0, i, 9)
        assert d[0] == -1.0
        assert d[p - 1] == pytest.approx(factorial(p), rel=1e-12)
        for n in range(2, min(2 * p - 1, 10)):
            if n != p:
                assert d[n - 1] == 0.0


def test_derivatives_against_finite_differences():
    X0, h = 0.7, 1e-3
    for i in (1, 2):
        d = ui_derivatives(X0, i, 2)
        fd1 = (ui_eval(X0 + h, i) - ui_eval(X0 - h, i)) / (2 * h)
        fd2 = (ui_eval(X0 + h, i) - 2 * ui_eval(X0, i) + ui_eval(X0 - h, i)) / h ** 2
        assert d[0] == pytest.approx(fd1, rel=1e-6)
        assert d[1] == pytest.approx(fd2, rel=1e-5)


def test_polynomials_are_integer():
    for P in derivative_polynomials(2):
        assert all(isinstance(c, int) for c in P)


@given(st.floats(-1e4, 1e4))
def test_ode_residual_vanishes(X):
    assert abs(ode_residual(X, 2)) < 1e-12 * (1 + abs(X))


def test_nu_rescaling():
    d = u2_nu_derivatives(0.0, 60.0, 5)
    assert d[0] == pytest.approx(-1.0)
    assert d[4] == pytest.approx(60.0, rel=1e-12)
    assert u2_nu_eval(0.3, 120.0) == pytest.approx(ui_eval(0.3, 2))
    with pytest.raises(NonPositiveNu):
        u2_nu_eval(1.0, 0.0)


def test_asymptotics():
    X = np.array([1e3, -1e5])
    assert np.allclose(u2_asymptotic(X), ui_eval(X, 2), rtol=1e-3)
    with pytest.raises(XTooSmall):
        u2_asymptotic(1.0)


def test_bound_certificates_hold():
    X = np.concatenate([-np.logspace(-3, 6, 400), np.logspace(-3, 6, 400)])
    checks = u2_bound_certificates(X)
    assert len(checks) == 6
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]
