r"""Self-similar Burgers profiles :math:`U_i`.

:math:`U_i` is the odd, decreasing solution of

.. math::  X = -U - U^{2i+1},

which solves :math:`-\frac{1}{2i}U + (\frac{2i+1}{2i}X + U)U' = 0`. For
:math:`i = 2` this is the unstable profile with :math:`U'(0) = -1` and
:math:`U^{(5)}(0) = 120`.

Derivatives are exact rational functions of :math:`U`: with
:math:`D = 1 + (2i+1)U^{2i}`,

.. math::  U^{(n)} = P_n(U) / D^{2n-1},\quad P_1 = -1,\quad
           P_{n+1} = -(P_n' D - (2n-1) P_n D'),

where the integer polynomials :math:`P_n` are built once per family.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NoConvergence, NonPositiveNu, XTooSmall

MAX_FAMILY = 4
MAX_DERIV = 9


@dataclass(frozen=True)
class ProfilePoint:
    X: float
    u: float
    derivatives: tuple  # orders 1..max_order
    family_index: int = 2


def _check_family(i):
    if not (1 <= int(i) <= MAX_FAMILY):
        raise ValueError(f"family index must be in 1..{MAX_FAMILY}, got {i}")


def ui_eval(X, i: int = 2):
    """Root ``U`` of ``X = -U - U^(2i+1)``; scalar or array."""
    _check_family(i)
    p = 2 * i + 1
    Xa = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(Xa)):
        raise NoConvergence("non-finite X")
    x = np.atleast_1d(Xa).ravel()
    ax = np.abs(x)
    # solve for V = -U >= 0 on |X|: V + V^p = |X|, then restore the sign
    lo = np.zeros_like(ax)
    hi = np.maximum(1.0, ax)
    v = np.where(ax < 1.0, ax / (1.0 + ax ** (p - 1)), ax ** (1.0 / p))
    v = np.clip(v, lo, hi)
    for _ in range(100):
        g = v + v ** p - ax
        lo = np.where(g < 0, v, lo)
        hi = np.where(g > 0, v, hi)
        vn = v - g / (1.0 + p * v ** (p - 1))
        bad = (vn < lo) | (vn > hi)
        vn = np.where(bad, 0.5 * (lo + hi), vn)
        done = np.abs(vn - v) <= 4e-16 * vn
        v = vn
        if np.all(done):
            break
    resid = np.abs(v + v ** p - ax)
    if np.any(resid > 1e-13 * (1.0 + ax)):
        raise NoConvergence("profile root iteration did not converge")
    u = -np.sign(x) * v
    if Xa.ndim == 0:
        return float(u[0])
    return u.reshape(Xa.shape)


def _pmul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for j, aj in enumerate(a):
        if aj:
            for k, bk in enumerate(b):
                out[j + k] += aj * bk
    return out


def _padd(a, b):
    n = max(len(a), len(b))
    return [(a[j] if j < len(a) else 0) + (b[j] if j < len(b) else 0) for j in range(n)]


def _pscale(a, c):
    return [c * x for x in a]


def _pderiv(a):
    return [j * a[j] for j in range(1, len(a))] or [0]


@lru_cache(maxsize=None)
def derivative_polynomials(i: int, max_order: int = MAX_DERIV):
    """Integer coefficient lists of ``P_1 .. P_max_order`` (lowest degree first)."""
    D = [1] + [0] * (2 * i - 1) + [2 * i + 1]
    dD = _pderiv(D)
    polys = [[-1]]
    for n in range(1, max_order):
        P = polys[-1]
        nxt = _padd(_pmul(_pderiv(P), D), _pscale(_pmul(P, dD), -(2 * n - 1)))
        polys.append(_pscale(nxt, -1))
    return tuple(tuple(p) for p in polys)


def _horner(coeffs, u):
    out = np.zeros_like(u)
    for c in reversed(coeffs):
        out = out * u + float(c)
    return out


def ui_derivatives(X, i: int = 2, max_order: int = 5):
    """Derivatives of order ``1..max_order`` at ``X``.

    Returns shape ``(max_order,)`` for scalar ``X`` and ``(max_order, len(X))``
    for arrays.
    """
    if not (1 <= max_order <= MAX_DERIV):
        raise ValueError(f"max_order must be in 1..{MAX_DERIV}")
    u = np.atleast_1d(ui_eval(X, i))
    D = 1.0 + (2 * i + 1) * u ** (2 * i)
    polys = derivative_polynomials(i)
    out = np.array([_horner(polys[n - 1], u) / D ** (2 * n - 1)
                    for n in range(1, max_order + 1)])
    if np.ndim(X) == 0:
        return out[:, 0]
    return out


def profile_point(X: float, i: int = 2, max_order: int = MAX_DERIV) -> ProfilePoint:
    return ProfilePoint(float(X), ui_eval(X, i), tuple(ui_derivatives(X, i, max_order)), i)


def _nu_scale(nu):
    if not nu > 0:
        raise NonPositiveNu(f"nu must be positive, got {nu}")
    return (nu / 120.0) ** 0.25


def u2_nu_eval(X, nu: float):
    """``(nu/120)^{-1/4} U_2((nu/120)^{1/4} X)``, fifth derivative at 0 equal to ``nu``."""
    lam = _nu_scale(nu)
    return ui_eval(lam * np.asarray(X, dtype=float), 2) / lam


def u2_nu_derivatives(X, nu: float, max_order: int = 5):
    lam = _nu_scale(nu)
    d = ui_derivatives(lam * np.asarray(X, dtype=float), 2, max_order)
    scale = lam ** np.arange(0, max_order)
    return d * (scale if d.ndim == 1 else scale[:, None])


def u2_asymptotic(X):
    """Two-term large-|X| expansion ``-sgn|X|^{1/5} + sgn|X|^{-3/5}/5``."""
    Xa = np.asarray(X, dtype=float)
    if np.any(np.abs(Xa) < 10.0):
        raise XTooSmall("asymptotic expansion needs |X| >= 10")
    a = np.abs(Xa)
    out = np.sign(Xa) * (-a ** 0.2 + a ** -0.6 / 5.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class BoundCheck:
    name: str
    n_checked: int
    worst_margin: float
    passed: bool


def u2_bound_certificates(X_samples, l: float = 0.1, slack: float = 1e-14):
    """Check the profile's pointwise envelope inequalities at ``X_samples``.

    Returns a list of :class:`BoundCheck`, one per inequality, with the
    smallest margin (bound minus value, in the direction that must stay
    nonnegative) over the samples where the inequality applies.
    """
    if not 0.0 < l < 0.2:
        raise ValueError("l must lie in (0, 0.2)")
    X = np.atleast_1d(np.asarray(X_samples, dtype=float))
    U = np.atleast_1d(ui_eval(X, 2))
    dU = np.atleast_1d(ui_derivatives(X, 2, 1)[0])
    w = (1.0 + X ** 4) ** -0.2
    out = []

    def add(name, margins):
        margins = np.asarray(margins)
        if margins.size == 0:
            out.append(BoundCheck(name, 0, float("inf"), True))
            return
        worst = float(np.min(margins))
        out.append(BoundCheck(name, int(margins.size), worst, worst >= -slack))

    add("amplitude |U| <= (1+X^4)^(1/20)", (1.0 + X ** 4) ** 0.05 - np.abs(U))
    add("slope |U'| <= (1+X^4)^(-1/5)", w - np.abs(dU))
    away = np.abs(X) >= l
    add("U' < 0 for |X| >= l", -dU[away])
    add("U' >= -(1-2l^4)(1+X^4)^(-1/5) for |X| >= l",
        dU[away] + (1.0 - 2.0 * l ** 4) * w[away])
    far = np.abs(X) >= 100.0
    add("U' < -7/40 (1+X^4)^(-1/5) for |X| >= 100", -7.0 / 40.0 * w[far] - dU[far])
    add("U' > -9/40 (1+X^4)^(-1/5) for |X| >= 100", dU[far] + 9.0 / 40.0 * w[far])
    return out


def ode_residual(X, i: int = 2):
    """Residual of ``-U/(2i) + ((2i+1)/(2i) X + U) U'``."""
    U = ui_eval(X, i)
    dU = ui_derivatives(X, i, 1)
    dU = dU[0]
    return -U / (2 * i) + ((2 * i + 1) / (2 * i) * np.asarray(X) + U) * dU
