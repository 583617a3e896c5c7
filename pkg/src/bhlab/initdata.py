r"""Two-parameter initial data near the unstable profile.

In self-similar variables at :math:`s_0 = -\log\varepsilon`,

.. math::

    U(X, s_0) = U_2(X)\,\chi(2\varepsilon^{5/4}X) + \hat U_0(X)
                + \chi(X)(\alpha X^2 + \beta X^3),

and in physical variables :math:`u_0(x) = \varepsilon^{1/4}U(\varepsilon^{-5/4}x, s_0) + \kappa_0`.
The tail of :math:`\hat U_0` cancels :math:`\kappa_0` away from the core so
that :math:`u_0` is supported in :math:`[-1, 1]`.

``family`` other than 2 swaps :math:`U_2` for :math:`U_i` with the matching
exponents; it is used for control runs only.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridTooSmall
from .grid import Field, Grid1D, derivative_multiplier
from .profile import ui_eval

CHI_KINDS = ("mollified", "smoothstep")
UHAT_KINDS = ("zero", "bump")


@dataclass(frozen=True)
class InitConfig:
    epsilon: float = 0.1
    alpha: float = 0.0
    beta: float = 0.0
    kappa0: float = 0.0
    uhat: str = "zero"
    uhat_amplitude: float = 0.0
    chi: str = "mollified"
    chi_delta: float = 0.25
    c_alpha: float = 1.0
    c_beta: float = 1.0
    family: int = 2

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 0.5:
            raise ValueError("epsilon must lie in (0, 0.5]")
        if self.uhat not in UHAT_KINDS:
            raise ValueError(f"uhat must be one of {UHAT_KINDS}")
        if self.chi not in CHI_KINDS:
            raise ValueError(f"chi must be one of {CHI_KINDS}")
        if abs(self.uhat_amplitude) > self.epsilon:
            raise ValueError("|uhat_amplitude| must not exceed epsilon")
        if not 0.0 < self.chi_delta <= 0.25:
            raise ValueError("chi_delta must lie in (0, 0.25]")
        if abs(self.alpha) > self.c_alpha * self.epsilon:
            raise ValueError(f"|alpha| exceeds c_alpha*epsilon = {self.c_alpha * self.epsilon}")
        if abs(self.beta) > self.c_beta * self.epsilon:
            raise ValueError(f"|beta| exceeds c_beta*epsilon = {self.c_beta * self.epsilon}")

    @property
    def s0(self) -> float:
        return -np.log(self.epsilon)

    @property
    def t0(self) -> float:
        return -self.epsilon

    @property
    def space_exponent(self) -> float:
        return (2 * self.family + 1) / (2 * self.family)

    @property
    def amp_exponent(self) -> float:
        return 1.0 / (2 * self.family)

    def with_params(self, alpha: float, beta: float) -> "InitConfig":
        from dataclasses import replace
        return replace(self, alpha=float(alpha), beta=float(beta))


# --- cutoff --------------------------------------------------------------

_GL64 = np.polynomial.legendre.leggauss(64)


def _gl(func, a, b):
    """Vectorized int_a^b func over arrays of upper limits ``b``."""
    x, w = _GL64
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[..., None] + half[..., None] * x
    return np.sum(func(pts) * w, axis=-1) * half


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _bump_norm():
    return float(_gl(_bump, -1.0, np.array(1.0)))


def _bump_cdf(t):
    """S(t) = int_{-1}^t psi with psi the normalized C-infinity bump on [-1, 1]."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    return _gl(_bump, -1.0, t) / _bump_norm()


def _bump_cdf_integral(t):
    """I(t) = int_{-1}^t S = t S(t) - int_{-1}^t tau psi(tau)."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, -1.0, 1.0)
    first = _gl(lambda z: z * _bump(z), -1.0, tc) / _bump_norm()
    inside = tc * _bump_cdf(tc) - first
    # beyond t = 1, S = 1 so I grows linearly
    return np.where(t > 1.0, inside + (t - 1.0), np.where(t < -1.0, 0.0, inside))


def _ramp_mollified(y, delta):
    """Mollified linear drop from 1 at y=0 to 0 at y=1 (y in [0, 1]).

    chi' = -m (1_[delta, 1-delta] * phi_delta), m = 1/(1-2 delta), so chi' is
    supported in [0, 1] and integrates to -1.
    """
    m = 1.0 / (1.0 - 2.0 * delta)
    return 1.0 - m * delta * (_bump_cdf_integral((y - delta) / delta)
                              - _bump_cdf_integral((y - 1.0 + delta) / delta))


def _ramp_smoothstep(y):
    """1 - P(y) with P the C^4 degree-9 smoothstep."""
    p = y ** 5 * (126.0 - 420.0 * y + 540.0 * y ** 2 - 315.0 * y ** 3 + 70.0 * y ** 4)
    return 1.0 - p


def chi_eval(X, kind: str = "mollified", delta: float = 0.25):
    """Even cutoff: 1 on [-1, 1], 0 for |X| >= 2, monotone in between."""
    Xa = np.asarray(X, dtype=float)
    a = np.abs(np.atleast_1d(Xa)).ravel()
    out = np.where(a <= 1.0, 1.0, 0.0)
    mid = (a > 1.0) & (a < 2.0)
    if np.any(mid):
        y = a[mid] - 1.0
        if kind == "mollified":
            out[mid] = _ramp_mollified(y, delta)
        elif kind == "smoothstep":
            out[mid] = _ramp_smoothstep(y)
        else:
            raise ValueError(f"unknown cutoff kind {kind!r}")
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if Xa.ndim == 0 else out.reshape(Xa.shape)


def chi_second_derivative_bound(kind: str = "mollified", delta: float = 0.25) -> float:
    """max |chi''| on the transition, computed in closed form."""
    if kind == "mollified":
        m = 1.0 / (1.0 - 2.0 * delta)
        return m * float(_bump(0.0)) / _bump_norm() / delta
    y = np.linspace(0.0, 1.0, 20001)
    p2 = (20 * y ** 3 * (126 - 420 * y + 540 * y ** 2 - 315 * y ** 3 + 70 * y ** 4)
          + 10 * y ** 4 * (-420 + 1080 * y - 945 * y ** 2 + 280 * y ** 3)
          + y ** 5 * (1080 - 1890 * y + 840 * y ** 2))
    return float(np.max(np.abs(p2)))


# --- datum -----------------------------------------------------------------

def _chi(cfg, X):
    return chi_eval(X, cfg.chi, cfg.chi_delta)


def uhat_core(cfg: InitConfig, X):
    """The part of Uhat_0 living in the core (zero for the 'zero' family)."""
    X = np.asarray(X, dtype=float)
    if cfg.uhat == "bump":
        A = cfg.uhat_amplitude
        return A * (X ** 2 / 2.0 + X ** 3 / 6.0) * _chi(cfg, X)
    return np.zeros_like(X)


def uhat_origin_jet(cfg: InitConfig) -> np.ndarray:
    """Derivatives of Uhat_0 at 0, orders 0..5."""
    jet = np.zeros(6)
    if cfg.uhat == "bump":
        jet[2] = cfg.uhat_amplitude
        jet[3] = cfg.uhat_amplitude
    return jet


def shooting_start(cfg: InitConfig):
    """Natural starting parameters ``(-Uhat''(0)/2, -Uhat'''(0)/6)``."""
    jet = uhat_origin_jet(cfg)
    return -0.5 * jet[2], -jet[3] / 6.0


def datum_origin_jet(cfg: InitConfig) -> np.ndarray:
    """Exact origin jet of U(., s0), orders 0..5 (family 2)."""
    from .profile import ui_derivatives
    jet = np.zeros(6)
    jet[1:] = ui_derivatives(0.0, cfg.family, 5)
    jet += uhat_origin_jet(cfg)
    jet[2] += 2.0 * cfg.alpha
    jet[3] += 6.0 * cfg.beta
    return jet


def selfsim_profile(cfg: InitConfig, X):
    """U(X, s0) including the far tail of Uhat_0."""
    X = np.asarray(X, dtype=float)
    eps = cfg.epsilon
    lam = eps ** cfg.space_exponent
    outer = _chi(cfg, 2.0 * lam * X)
    U = ui_eval(X, cfg.family) * outer
    U = U + uhat_core(cfg, X)
    U = U - eps ** (-cfg.amp_exponent) * cfg.kappa0 * (1.0 - outer)
    return U + _chi(cfg, X) * (cfg.alpha * X ** 2 + cfg.beta * X ** 3)


def build_initial_selfsim(cfg: InitConfig, X_grid: Grid1D) -> Field:
    """U(X, s0) sampled on ``X_grid`` (must cover the core |X| <= eps^{-5/4})."""
    R = cfg.epsilon ** -cfg.space_exponent
    if X_grid.x_min > -R or X_grid.x_max < R:
        raise GridTooSmall(f"self-similar grid must span [-{R:.4g}, {R:.4g}]")
    return Field(X_grid, selfsim_profile(cfg, X_grid.x), "U0", cfg.s0)


def build_initial_physical(cfg: InitConfig, grid: Grid1D) -> Field:
    """u0(x) = eps^{1/4} U(eps^{-5/4} x, s0) + kappa0, supported in [-1, 1]."""
    if grid.x_min > -2.0 or grid.x_max < 2.0:
        raise GridTooSmall("physical grid must span [-2, 2]")
    eps = cfg.epsilon
    x = grid.x
    X = x * eps ** -cfg.space_exponent
    u = eps ** cfg.amp_exponent * selfsim_profile(cfg, X) + cfg.kappa0
    # exact zero outside the support, removing round-off of the kappa0 cancellation
    u[np.abs(x) >= 1.0] = 0.0
    return Field(grid, u, "u0", cfg.t0)


def parameter_direction(cfg: InitConfig, grid: Grid1D, which: str) -> Field:
    """d u0 / d alpha (or beta) = eps^{1/4} chi(X) X^2 (or X^3)."""
    eps = cfg.epsilon
    X = grid.x * eps ** -cfg.space_exponent
    power = {"alpha": 2, "beta": 3}[which]
    v = eps ** cfg.amp_exponent * _chi(cfg, X) * X ** power
    return Field(grid, v, f"du0/d{which}", cfg.t0)


# --- validation -------------------------------------------------------------

@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.bound - self.value


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def as_dict(self):
        return {c.name: {"value": c.value, "bound": c.bound, "passed": c.passed,
                         "margin": c.margin} for c in self.checks}


def envelope_l2_bound() -> float:
    """sqrt of int (1+X^4)^{-2/5} dX, the L2 norm of the slope envelope."""
    from scipy.integrate import quad
    val = 2.0 * quad(lambda X: (1.0 + X ** 4) ** -0.4, 0.0, np.inf, limit=200)[0]
    return float(np.sqrt(val))


def _uhat_core_derivatives(cfg, max_order=8, half_width=8.0, n=2048):
    g = Grid1D.symmetric(half_width, n)
    fh = np.fft.rfft(uhat_core(cfg, g.x))
    out = [np.fft.irfft(fh, n)]
    for m in range(1, max_order + 1):
        out.append(np.fft.irfft(fh * derivative_multiplier(g, m), n))
    return g.x, np.array(out)


def validate_initial(cfg: InitConfig, u0: Field, tol: float = 1e-10) -> ValidationReport:
    """Check the datum's smallness and shape conditions; report margins."""
    eps = cfg.epsilon
    checks = []
    jet = uhat_origin_jet(cfg)
    for m in (0, 1, 4, 5):
        checks.append(Check(f"uhat^({m})(0) = 0", abs(jet[m]), tol, abs(jet[m]) <= tol))
    for m in (2, 3):
        checks.append(Check(f"|uhat^({m})(0)| <= eps", abs(jet[m]), eps, abs(jet[m]) <= eps))

    X, d = _uhat_core_derivatives(cfg)
    mid = np.abs(X) <= 0.5 * eps ** -1.25
    env0 = eps * (1.0 + X[mid] ** 4) ** 0.05
    ratio = float(np.max(np.abs(d[0][mid]) / env0))
    checks.append(Check("|uhat| <= eps (1+X^4)^(1/20)", ratio, 1.0, ratio <= 1.0))
    env = eps * (1.0 + X[mid] ** 4) ** -0.2
    for m in range(1, 9):
        ratio = float(np.max(np.abs(d[m][mid]) / env))
        checks.append(Check(f"|uhat^({m})| <= eps (1+X^4)^(-1/5)", ratio, 1.0, ratio <= 1.0))
    # far-field slope of the kappa0 tail: 2 eps kappa0 chi'
    far_slope = 2.0 * eps * abs(cfg.kappa0) * _max_chi_slope(cfg)
    checks.append(Check("far |uhat'| <= eps/2", far_slope, 0.5 * eps, far_slope <= 0.5 * eps))

    grid = u0.grid
    ux = np.fft.irfft(np.fft.rfft(u0.values) * derivative_multiplier(grid, 1), grid.n_points)
    l2 = float(np.sqrt(eps ** 0.75 * grid.spacing * np.sum(ux ** 2)))
    checks.append(Check("||U_X(., s0)||_L2 <= sqrt(6)", l2, np.sqrt(6.0), l2 <= np.sqrt(6.0)))

    nz = np.nonzero(u0.values)[0]
    radius = float(np.max(np.abs(grid.x[nz]))) if nz.size else 0.0
    checks.append(Check("support radius <= 1", radius, 1.0, radius <= 1.0))

    from .grid import jet_from_hat
    j = jet_from_hat(np.fft.rfft(u0.values), grid, 0.0, 1)
    slope_err = abs(j[1] + 1.0 / eps) * eps
    checks.append(Check("u0'(0) = -1/eps (relative)", slope_err, 1e-8, slope_err <= 1e-8))
    min_slope = float(np.min(ux))
    rel = (min_slope + 1.0 / eps) * eps
    checks.append(Check("min u0' >= -1/eps (relative)", -rel, 1e-6, -rel <= 1e-6))
    return ValidationReport(checks)


@lru_cache(maxsize=None)
def _max_chi_slope_cached(kind, delta):
    y = np.linspace(1.0, 2.0, 4001)
    c = chi_eval(y, kind, delta)
    return float(np.max(np.abs(np.gradient(c, y))))


def _max_chi_slope(cfg):
    return _max_chi_slope_cached(cfg.chi, cfg.chi_delta)
