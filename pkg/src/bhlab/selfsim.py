r"""The modulated self-similar frame.

With modulation variables :math:`(\tau, \xi, \kappa)` and
:math:`s = -\log(\tau - t)`,

.. math::

    X = \frac{x - \xi}{(\tau - t)^{5/4}}, \qquad
    u(x, t) = e^{-s/4} U(X, s) + \kappa, \qquad
    \partial_x^n u = e^{(5n-1)s/4}\,\partial_X^n U.

The variables are pinned by :math:`U(0) = 0`, :math:`U_X(0) = -1` and
:math:`\partial_X^4 U(0) = 0`, which invert to: :math:`\xi` is a root of
:math:`\partial_x^4 u`, :math:`\tau = t - 1/u_x(\xi)`, :math:`\kappa = u(\xi)`.

For a family index ``i`` the exponents become :math:`(2i+1)/(2i)` and
:math:`1/(2i)` and the pinned derivative is :math:`\partial_X^{2i}U(0)`.

Jets at the origin are read from a low-pass filtered interpolant: the
filter keeps self-similar wavenumbers up to ``filter_kX`` and removes the
round-off floor that high-order derivatives would otherwise amplify.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import (DegenerateModulation, FramesMisaligned, LeftDomain,
                     PointOutsideGrid, PositiveSlope, SmallFifthDerivative,
                     TauDotGeOne)
from .grid import (Field, Grid1D, derivative_multiplier, fourier_eval, fourier_eval_orders,
                   jet_from_hat)

DEFAULT_FILTER_KX = 100.0
FILTER_ORDER = 16


def exponents(family: int = 2):
    """(space exponent, amplitude exponent) of the frame for ``U_family``."""
    return (2 * family + 1) / (2 * family), 1.0 / (2 * family)


def jet_scale(s: float, family: int = 2, max_order: int = 9) -> np.ndarray:
    """Factors turning physical derivatives at xi into X-derivatives of U."""
    a, b = exponents(family)
    n = np.arange(max_order + 1)
    return np.exp(-(a * n - b) * s)


@dataclass(frozen=True)
class ModulationState:
    t: float
    tau: float
    xi: float
    kappa: float
    tau_dot: float | None = None
    xi_dot: float | None = None
    kappa_dot: float | None = None

    @property
    def s(self) -> float:
        return -np.log(self.tau - self.t)

    def with_rates(self, tau_dot, xi_dot, kappa_dot) -> "ModulationState":
        return replace(self, tau_dot=float(tau_dot), xi_dot=float(xi_dot),
                       kappa_dot=float(kappa_dot))

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("t", "tau", "xi", "kappa", "tau_dot", "xi_dot", "kappa_dot")}


@dataclass
class SelfSimilarFrame:
    """Snapshot of U(., s) with its origin jet.

    ``origin_jet[n]`` is the n-th X-derivative of U at 0. ``hilbert_jet[n]``
    is H[d^n U](0) for n = 1..5, with entry 0 holding H[U + e^{s/4} kappa](0).
    ``U`` and ``dU`` are samples on a window of the X line (not periodic).
    """

    s: float
    mod: ModulationState
    origin_jet: np.ndarray
    family: int = 2
    U: Field | None = None
    dU: Field | None = None
    hilbert_jet: np.ndarray | None = None
    hilbert_U: Field | None = None
    physical: Field | None = None

    @property
    def nu_estimate(self) -> float:
        return float(self.origin_jet[2 * self.family + 1])

    def constraint_residuals(self):
        j = self.origin_jet
        return abs(j[0]), abs(j[1] + 1.0), abs(j[2 * self.family])


def jet_filter(grid: Grid1D, s: float, family: int = 2,
               filter_kX: float | None = DEFAULT_FILTER_KX) -> np.ndarray:
    """Smooth low-pass weights keeping |k| <~ filter_kX * e^{a s}."""
    if filter_kX is None:
        return np.ones(grid.n_points // 2 + 1)
    a, _ = exponents(family)
    kc = filter_kX * np.exp(a * s)
    return np.exp(-(grid.k / kc) ** FILTER_ORDER)


def _slope_seed(uh, grid):
    ux = np.fft.irfft(uh * derivative_multiplier(grid, 1), grid.n_points)
    j = int(np.argmin(ux))
    return grid.x[j], -ux[j]


def extract_modulation_hat(uh: np.ndarray, grid: Grid1D, t: float,
                           hint: ModulationState | None = None, family: int = 2,
                           radius: float = 0.2, filter_kX=DEFAULT_FILTER_KX,
                           s_filter: float | None = None):
    """Core of :func:`extract_modulation` working on rfft coefficients.

    Returns ``(ModulationState, physical jet at xi, orders 0..9)``.
    ``s_filter`` fixes the self-similar time used by the jet filter; by
    default the filter is evaluated at the extracted s.
    """
    if hint is None:
        seed, steep = _slope_seed(uh, grid)
        if steep <= 0:
            raise PositiveSlope("u is nowhere decreasing")
        s_guess = np.log(steep)
    else:
        seed = hint.xi
        s_guess = hint.s
    if s_filter is not None:
        return _extract_at(uh, grid, t, seed, s_guess, family, radius, filter_kX, s_filter)
    # filter at the hint's s, then once more at the extracted s so that
    # frames built at mod.s see the same filter
    mod, jet = _extract_at(uh, grid, t, seed, s_guess, family, radius, filter_kX, s_guess)
    return _extract_at(uh, grid, t, mod.xi, mod.s, family, radius, filter_kX, mod.s)


def _extract_at(uh, grid, t, seed, s_guess, family, radius, filter_kX, s_filter):
    fh = uh * jet_filter(grid, s_filter, family, filter_kX)
    m = 2 * family
    scale = np.exp(-exponents(family)[0] * s_guess)

    def g_and_dg(x):
        j = jet_from_hat(fh, grid, x, m + 1, orders=(m, m + 1))
        return j[m], j[m + 1]

    xi = _newton_root(g_and_dg, seed, radius, tol=1e-13 * scale)
    if xi is None:
        xi = _bracketed_root(fh, grid, m, seed, radius)
    jet = jet_from_hat(fh, grid, xi, 9)
    if not jet[1] < 0:
        raise PositiveSlope(f"u_x(xi) = {jet[1]:.3g} is not negative")
    tau = t - 1.0 / jet[1]
    return ModulationState(t=float(t), tau=float(tau), xi=float(xi), kappa=float(jet[0])), jet


def _newton_root(g_and_dg, seed, radius, tol, max_iter=40):
    x = seed
    prev = None
    for _ in range(max_iter):
        g, dg = g_and_dg(x)
        if dg == 0 or not np.isfinite(dg):
            return None
        step = g / dg
        x = x - step
        if abs(x - seed) > radius:
            return None
        if abs(step) <= tol:
            return x
        # round-off floor: accept once steps stop shrinking near the root
        if prev is not None and abs(step) <= 1e-3 * radius * 1e-6 and abs(step) > 0.5 * prev:
            return x
        prev = abs(step)
    return None


def _bracketed_root(fh, grid, m, seed, radius):
    """Nearest sign change of the m-th derivative within ``radius`` of ``seed``."""
    gvals = np.fft.irfft(fh * derivative_multiplier(grid, m), grid.n_points)
    x = grid.x
    idx = np.nonzero(np.abs(x - seed) <= radius)[0]
    if idx.size < 2:
        raise DegenerateModulation("search window holds fewer than two grid points")
    gv = gvals[idx]
    change = np.nonzero(np.sign(gv[:-1]) * np.sign(gv[1:]) <= 0)[0]
    if change.size == 0:
        raise DegenerateModulation(f"no sign change of d^{m}u within {radius} of {seed:.4g}")
    best = change[np.argmin(np.abs(x[idx[change]] - seed))]
    a, b = x[idx[best]], x[idx[best + 1]]

    def g(xx):
        return jet_from_hat(fh, grid, xx, m, orders=(m,))[m]

    ga, gb = g(a), g(b)
    if ga == 0:
        return a
    if gb == 0:
        return b
    if ga * gb > 0:
        raise DegenerateModulation("sign change lost under interpolation")
    return brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def extract_modulation(u: Field, t: float, hint: ModulationState | None = None,
                       family: int = 2, radius: float = 0.2,
                       filter_kX=DEFAULT_FILTER_KX) -> ModulationState:
    """Modulation variables of ``u`` at time ``t`` from the three constraints."""
    mod, _ = extract_modulation_hat(np.fft.rfft(u.values), u.grid, t, hint, family,
                                    radius, filter_kX)
    return mod


def origin_jet_from_physical(jet_x: np.ndarray, mod: ModulationState,
                             family: int = 2) -> np.ndarray:
    """X-derivatives of U at 0 from physical derivatives of u at xi."""
    j = np.array(jet_x, dtype=float)
    j[0] -= mod.kappa
    return j * jet_scale(mod.s, family, j.size - 1)


def hilbert_jet_from_physical(hjet_x: np.ndarray, mod: ModulationState,
                              family: int = 2) -> np.ndarray:
    """H[d^n U](0) from physical derivatives of H[u] at xi (entry 0: H[U+e^{s/4}k])."""
    return np.asarray(hjet_x, dtype=float) * jet_scale(mod.s, family, len(hjet_x) - 1)


def to_selfsimilar(u: Field, t: float, mod: ModulationState, X_grid: Grid1D | None = None,
                   family: int = 2, filter_kX=DEFAULT_FILTER_KX,
                   hilbert_hat: np.ndarray | None = None) -> SelfSimilarFrame:
    """Frame of ``u`` in the modulated variables.

    ``X_grid`` (optional) selects the window on which U and U_X are sampled.
    ``hilbert_hat`` (rfft of H[u]) adds the Hilbert jet and H[U+e^{s/4}k]
    on the window.
    """
    return frame_from_hat(np.fft.rfft(u.values), u.grid, mod, X_grid, family, filter_kX,
                          hilbert_hat, physical=u)


def frame_from_hat(uh, grid, mod, X_grid=None, family=2, filter_kX=DEFAULT_FILTER_KX,
                   hilbert_hat=None, physical=None, s_filter=None) -> SelfSimilarFrame:
    s = mod.s
    filt = jet_filter(grid, s if s_filter is None else s_filter, family, filter_kX)
    fh = uh * filt
    jet = origin_jet_from_physical(jet_from_hat(fh, grid, mod.xi, 9), mod, family)
    hjet = None
    if hilbert_hat is not None:
        hjet = hilbert_jet_from_physical(
            jet_from_hat(hilbert_hat * filt, grid, mod.xi, 5), mod, family)
    frame = SelfSimilarFrame(s=s, mod=mod, origin_jet=jet, family=family,
                             hilbert_jet=hjet, physical=physical)
    if X_grid is not None:
        a, b = exponents(family)
        x = mod.xi + np.exp(-a * s) * X_grid.x
        if x.min() < grid.x_min or x.max() > grid.x_max:
            raise PointOutsideGrid("requested X window maps outside the physical grid")
        v, dv = fourier_eval_orders(fh, grid, x, (0, 1))
        U = np.exp(b * s) * (v - mod.kappa)
        dU = np.exp((b - a) * s) * dv
        frame.U = Field(X_grid, U, "U", s)
        frame.dU = Field(X_grid, dU, "U_X", s)
        if hilbert_hat is not None:
            hU = np.exp(b * s) * fourier_eval(hilbert_hat * filt, grid, x)
            frame.hilbert_U = Field(X_grid, hU, "H[U+e^{s/4}kappa]", s)
    return frame


def from_selfsimilar(frame: SelfSimilarFrame):
    """Physical points and values ``(x, u)`` encoded by ``frame.U``."""
    a, b = exponents(frame.family)
    X = frame.U.x
    x = frame.mod.xi + np.exp(-a * frame.s) * X
    u = frame.mod.kappa + np.exp(-b * frame.s) * frame.U.values
    return x, u


def modulation_rhs(frame: SelfSimilarFrame, hilbert_at_origin) -> tuple:
    r"""Rates :math:`(\dot\tau, \dot\xi, \dot\kappa)` implied by the constraints.

    ``hilbert_at_origin`` = (H[U + e^{s/4} kappa](0), H[U_X](0), H[d^4 U](0)).
    """
    if frame.family != 2:
        raise ValueError("modulation equations are implemented for the U_2 frame")
    s = frame.s
    a, b, c5 = frame.origin_jet[2], frame.origin_jet[3], frame.origin_jet[5]
    if abs(c5) < 10.0:
        raise SmallFifthDerivative(f"|d^5 U(0)| = {abs(c5):.3g} < 10")
    h0, h1, h4 = (float(v) for v in hilbert_at_origin[:3])
    k_minus_xidot = np.exp(-s / 4) * (np.exp(-s) * h4 - 10.0 * a * b) / c5
    scaled = np.exp(s / 4) * k_minus_xidot
    tau_dot = np.exp(-s) * h1 - scaled * a
    kappa_dot = np.exp(s) * k_minus_xidot + np.exp(-s / 4) * h0
    xi_dot = frame.mod.kappa - k_minus_xidot
    return float(tau_dot), float(xi_dot), float(kappa_dot)


def frame_hilbert_triple(frame: SelfSimilarFrame):
    """(H[U+e^{s/4}k](0), H[U_X](0), H[d^4U](0)) from the frame's Hilbert jet."""
    h = frame.hilbert_jet
    return h[0], h[1], h[4]


def transport_speed(frame: SelfSimilarFrame, mod: ModulationState | None = None) -> Field:
    """V = (U + e^{s/4}(kappa - xi_dot))/(1 - tau_dot) + 5X/4 on the frame window."""
    mod = frame.mod if mod is None else mod
    if mod.tau_dot >= 1.0:
        raise TauDotGeOne(f"tau_dot = {mod.tau_dot} >= 1")
    X = frame.U.x
    shift = np.exp(frame.s / 4) * (mod.kappa - mod.xi_dot)
    V = (frame.U.values + shift) / (1.0 - mod.tau_dot) + 1.25 * X
    return Field(frame.U.grid, V, "V", frame.s)


def lagrangian_flow(X0: float, s0: float, s1: float, speed_provider,
                    max_step: float = 0.01, bound: float | None = None):
    """RK4 path of dPhi/ds = V(Phi, s), Phi(s0) = X0.

    ``speed_provider(X, s)`` returns V; it may raise :class:`LeftDomain`.
    Returns arrays ``(s, Phi)``.
    """
    if s1 < s0:
        raise ValueError("s1 must not precede s0")
    n = max(1, int(np.ceil((s1 - s0) / max_step)))
    h = (s1 - s0) / n
    ss = s0 + h * np.arange(n + 1)
    phi = np.empty(n + 1)
    phi[0] = X0

    def V(X, s):
        if bound is not None and abs(X) > bound:
            raise LeftDomain(f"trajectory left |X| <= {bound} at s = {s:.4g}")
        return speed_provider(X, s)

    for j in range(n):
        s, y = ss[j], phi[j]
        k1 = V(y, s)
        k2 = V(y + 0.5 * h * k1, s + 0.5 * h)
        k3 = V(y + 0.5 * h * k2, s + 0.5 * h)
        k4 = V(y + h * k3, s + h)
        phi[j + 1] = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if bound is not None and abs(phi[-1]) > bound:
        raise LeftDomain(f"trajectory left |X| <= {bound}")
    return ss, phi


def frame_speed_provider(frames):
    """V(X, s) from a sequence of frames: spline in X, nearest frame in s."""
    from scipy.interpolate import CubicSpline

    ss = np.array([f.s for f in frames])
    splines = []
    for f in frames:
        V = transport_speed(f)
        splines.append(CubicSpline(V.x, V.values))
    lo = frames[0].U.x[0]
    hi = frames[0].U.x[-1]

    def provider(X, s):
        if not lo <= X <= hi:
            raise LeftDomain(f"X = {X:.4g} outside the frame window")
        j = int(np.argmin(np.abs(ss - s)))
        return float(splines[j](X))

    return provider


def selfsimilar_residual(frame: SelfSimilarFrame, prev: SelfSimilarFrame,
                         hilbert_field: Field | None = None,
                         prev_hilbert_field: Field | None = None) -> Field:
    r"""Pointwise residual of the self-similar equation between two frames.

    .. math::

        (\partial_s - \tfrac14)U + V U_X + \frac{e^{-3s/4}\dot\kappa}{1-\dot\tau}
        - \frac{e^{-s}}{1-\dot\tau} H[U + e^{s/4}\kappa]

    The s-derivative is the two-frame difference and every other term is the
    average of its values on the two frames, so the residual is centred at
    the midpoint. ``hilbert_field`` of None means H is switched off.
    """
    if frame.U is None or prev.U is None or frame.U.grid != prev.U.grid:
        raise FramesMisaligned("frames must be sampled on the same X grid")
    ds = frame.s - prev.s
    if not ds > 0:
        raise FramesMisaligned("frames must be ordered in s")

    def terms(fr, hf):
        m = fr.mod
        V = transport_speed(fr, m).values
        out = -0.25 * fr.U.values + V * fr.dU.values
        out = out + np.exp(-0.75 * fr.s) * m.kappa_dot / (1.0 - m.tau_dot)
        if hf is not None:
            out = out - np.exp(-fr.s) / (1.0 - m.tau_dot) * hf.values
        return out

    r = (frame.U.values - prev.U.values) / ds
    r = r + 0.5 * (terms(frame, hilbert_field) + terms(prev, prev_hilbert_field))
    return Field(frame.U.grid, r, "self-similar residual", 0.5 * (frame.s + prev.s))
