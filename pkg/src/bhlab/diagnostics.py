r"""Measurements of the blowup picture on simulation output.

All estimators are pure functions of recorded trajectories, frames or
fields. Inequalities whose constants are asymptotic (powers of
:math:`\varepsilon` or of a large unspecified constant) are evaluated as
monitors with user-supplied constants; they report, they do not abort.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (FramesMisaligned, InsufficientDecade, NonPositiveValues,
                     WindowTooNarrow)
from .grid import Field, fourier_eval, fourier_eval_orders
from .profile import u2_nu_eval, ui_derivatives, ui_eval
from .selfsim import DEFAULT_FILTER_KX, SelfSimilarFrame, exponents, jet_filter


# --- fits --------------------------------------------------------------------

def _linear_fit(x, y):
    """Least-squares slope, intercept and slope standard error."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = x.size
    if n > 2:
        resid = y - A @ coef
        sxx = np.sum((x - x.mean()) ** 2)
        stderr = float(np.sqrt(np.sum(resid ** 2) / (n - 2) / sxx)) if sxx > 0 else np.inf
    else:
        stderr = float("inf")
    return float(coef[0]), float(coef[1]), stderr


def fit_decay(s, values, min_points: int = 6):
    """Exponential rate of ``values`` in ``s``: slope of log(value) vs s."""
    s = np.asarray(s, float)
    v = np.asarray(values, float)
    if s.size != v.size:
        raise ValueError("s and values differ in length")
    if s.size < min_points:
        raise WindowTooNarrow(f"need at least {min_points} points, got {s.size}")
    if np.any(v <= 0):
        raise NonPositiveValues("decay fit needs strictly positive values")
    rate, _, stderr = _linear_fit(s, np.log(v))
    return rate, stderr


def running_envelope(values):
    """``max_{s' >= s} |value(s')|``: removes isolated zero crossings before a log fit."""
    v = np.abs(np.asarray(values, float))
    return np.maximum.accumulate(v[::-1])[::-1]


# --- blowup time, location and rate -------------------------------------------

def _last_decade(gap, min_frames: int = 10):
    gap = np.asarray(gap, float)
    g_end = gap[-1]
    if not g_end > 0:
        raise InsufficientDecade("tau - t is not positive at the last frame")
    if np.max(gap) < 10.0 * g_end:
        raise InsufficientDecade("the run does not span a decade of tau - t")
    sel = gap <= 10.0 * g_end
    if np.count_nonzero(sel) < min_frames:
        raise InsufficientDecade(
            f"{np.count_nonzero(sel)} frames in the last decade, need {min_frames}")
    return sel


def blowup_estimate(traj, min_frames: int = 10):
    """(T*, x*) by extrapolating tau(t) and xi(t) over the last decade of tau - t.

    tau and xi are fitted linearly in t on that window; T* solves
    tau(T) = T and x* = xi(T*).
    """
    r = traj.records
    t, tau, xi = r["t"], r["tau"], r["xi"]
    sel = _last_decade(tau - t, min_frames)
    c1, c0, _ = _linear_fit(t[sel], tau[sel])
    T = c0 / (1.0 - c1)
    d1, d0, _ = _linear_fit(t[sel], xi[sel])
    return float(T), float(d0 + d1 * T)


def gradient_rate_monitor(traj, T_star: float):
    """(min, max) of (T* - t) |u_x|_inf over the last decade of T* - t."""
    r = traj.records
    gap = T_star - r["t"]
    keep = gap > 0
    gap = gap[keep]
    sel = gap <= 10.0 * gap[-1]
    c = gap[sel] * r["slope"][keep][sel]
    return float(c.min()), float(c.max())


# --- Hölder exponent ---------------------------------------------------------

def holder_samples(u: Field, x_star: float, window=(0.005, 0.5), filter_hat=None):
    """Dyadic radii r_j = r_max 2^{-j} >= r_min and the increments on both sides."""
    r_min, r_max = window
    h = u.grid.spacing
    if r_min < 4.0 * h:
        raise ValueError(f"r_min = {r_min} is below 4 grid spacings ({4 * h:.3g})")
    if r_max > 0.5 + 1e-12:
        raise ValueError("r_max must not exceed 0.5")
    if r_min >= r_max:
        raise ValueError("empty Hölder window")
    radii = []
    r = r_max
    while r >= r_min * (1 - 1e-12):
        radii.append(r)
        r *= 0.5
    radii = np.array(radii)
    uh = np.fft.rfft(u.values) if filter_hat is None else filter_hat
    pts = np.concatenate([[x_star], x_star + radii, x_star - radii])
    vals = fourier_eval(uh, u.grid, pts)
    du = np.concatenate([vals[1:1 + radii.size], vals[1 + radii.size:]]) - vals[0]
    rr = np.concatenate([radii, radii])
    return rr, du


def holder_fit(u_final: Field, x_star: float, window=(0.005, 0.5), min_points: int = 8):
    """Pooled log-log slope of |u(x) - u(x*)| against |x - x*|.

    Returns ``(exponent, stderr)``; ``min_points`` counts samples pooled over
    both sides of x*.
    """
    rr, du = holder_samples(u_final, x_star, window)
    ok = np.abs(du) > 0
    if np.count_nonzero(ok) < min_points:
        raise WindowTooNarrow(f"{np.count_nonzero(ok)} dyadic samples, need {min_points}")
    slope, _, stderr = _linear_fit(np.log(rr[ok]), np.log(np.abs(du[ok])))
    return slope, stderr


# --- profile convergence -----------------------------------------------------

@dataclass
class ProfileSeries:
    s: np.ndarray
    errors: np.ndarray
    nu_hat: float
    half_width: float

    def tail_decreasing(self, fraction: float = 0.5, strict: bool = True) -> bool:
        """Monotone decrease over the final ``fraction`` of the s-window."""
        s0 = self.s[0] + (1.0 - fraction) * (self.s[-1] - self.s[0])
        e = self.errors[self.s >= s0]
        d = np.diff(e)
        return bool(np.all(d < 0) if strict else np.all(d <= 0))


def profile_convergence(frames, half_width: float = 5.0) -> ProfileSeries:
    """sup_{|X| <= half_width} |U(., s) - U_2^nu| with nu read at the last frame."""
    if len(frames) < 3:
        raise ValueError("need at least 3 frames")
    if frames[-1].s - frames[0].s < 1.0:
        raise ValueError("frames must span at least one unit of s")
    nu = float(frames[-1].origin_jet[5])
    s, err = [], []
    for fr in frames:
        if fr.U is None:
            raise ValueError("frames must carry sampled U")
        X = fr.U.x
        sel = np.abs(X) <= half_width
        if X[sel].min() > -half_width + 1e-9 or X[sel].max() < half_width - fr.U.grid.spacing - 1e-9:
            raise ValueError("frame window does not cover the requested half width")
        err.append(float(np.max(np.abs(fr.U.values[sel] - u2_nu_eval(X[sel], nu)))))
        s.append(fr.s)
    return ProfileSeries(np.array(s), np.array(err), nu, half_width)


# --- origin ODE system -------------------------------------------------------

def origin_rhs(a, b, c, d6, h2, h3, h5, s, tau_dot, drift, terms: bool = False):
    r"""Right-hand sides of d/ds of (U''(0), U'''(0), U^{(5)}(0)).

    ``drift`` is :math:`e^{s/4}(\kappa - \dot\xi)`; ``h2, h3, h5`` are
    :math:`H[\partial^n U](0)`; ``d6`` is :math:`\partial^6 U(0)`. With
    ``terms=True`` the individual contributions are returned by name.
    """
    q = 1.0 / (1.0 - tau_dot)
    e = np.exp(-s)
    parts = {
        "a": {"damping": 0.75 * a, "tau": 3.0 * tau_dot * q * a, "drift": -drift * b * q,
              "hilbert": e * h2 * q},
        "b": {"damping": 0.5 * b, "tau": 4.0 * tau_dot * q * b, "hilbert": e * h3 * q,
              "quadratic": -3.0 * a * a * q},
        "c": {"tau": 6.0 * tau_dot * q * c, "hilbert": e * h5 * q,
              "drift": -drift * d6 * q, "quadratic": -10.0 * b * b * q},
    }
    if terms:
        return parts
    return tuple(sum(p.values()) for p in (parts["a"], parts["b"], parts["c"]))


@dataclass
class OdeCheck:
    s: np.ndarray
    residuals: np.ndarray  # (len(s), 3): a, b, nu rows
    scale: np.ndarray

    @property
    def max_abs(self):
        return np.max(np.abs(self.residuals), axis=0)


def origin_ode_check(s, jets, hjets, tau_dot, drift) -> OdeCheck:
    """Finite-difference d/ds of the recorded origin jet against :func:`origin_rhs`.

    ``jets`` has shape (m, >= 7), ``hjets`` (m, 6); ``tau_dot`` and ``drift``
    are per-record series. Derivatives use second-order differences on the
    (possibly uneven) s samples.
    """
    s = np.asarray(s, float)
    jets = np.asarray(jets, float)
    hjets = np.asarray(hjets, float)
    if s.size < 3 or jets.shape[0] != s.size or hjets.shape[0] != s.size:
        raise FramesMisaligned("jet and s series must have equal length >= 3")
    if np.any(np.diff(s) <= 0):
        raise FramesMisaligned("s must be strictly increasing")
    a, b, c, d6 = jets[:, 2], jets[:, 3], jets[:, 5], jets[:, 6]
    rhs = np.array(origin_rhs(a, b, c, d6, hjets[:, 2], hjets[:, 3], hjets[:, 5], s,
                              np.asarray(tau_dot, float), np.asarray(drift, float))).T
    fd = np.column_stack([np.gradient(v, s) for v in (a, b, c)])
    inner = slice(1, -1)
    scale = np.max(np.abs(rhs[inner]), axis=0)
    return OdeCheck(s[inner], (fd - rhs)[inner], scale)


def trajectory_drift(traj):
    """e^{s/4}(kappa - xi_dot) per record."""
    r = traj.records
    return np.exp(r["s"] / 4.0) * (r["kappa"] - r["xi_dot"])


# --- bootstrap monitor -------------------------------------------------------

@dataclass
class MonitorThresholds:
    """Constants standing in for the asymptotic powers of epsilon and M."""

    l: float = 0.05
    near: float = 0.63
    near_floor: float = 0.32
    near_high: float = 0.63
    middle_U: float = 0.71
    middle_1x: float = 0.5
    M: float = 4.0
    far_1x: float = 4.0
    origin_a: float = 0.79
    origin_b: float = 4.0 ** 27
    origin_nu: float = 0.32
    l2_1x: float = float(np.sqrt(7.0))
    constraint_tol: float = 1e-8
    x_middle_max: float = 50.0
    n_samples: int = 48

    @classmethod
    def from_epsilon(cls, epsilon: float, M: float = 4.0, **overrides):
        e = epsilon
        vals = dict(near=e ** 0.2, near_floor=e ** 0.5, near_high=e ** 0.2,
                    middle_U=e ** 0.15, middle_1x=e ** 0.05, M=M, origin_a=e ** 0.1,
                    origin_b=M ** 27, origin_nu=e ** 0.5)
        vals.update(overrides)
        return cls(**vals)


HARD_CHECKS = ("l2_1x",)


@dataclass
class Verdict:
    passed: bool
    worst_margin: float
    n_checked: int
    hard: bool = False


def _verdict(name, values, bounds):
    values = np.abs(np.atleast_1d(np.asarray(values, float)))
    bounds = np.atleast_1d(np.asarray(bounds, float)) * np.ones_like(values)
    if values.size == 0:
        return Verdict(True, float("inf"), 0, name in HARD_CHECKS)
    margins = 1.0 - values / bounds
    return Verdict(bool(np.all(margins >= 0)), float(np.min(margins)), int(values.size),
                   name in HARD_CHECKS)


def _frame_derivatives(frame, X, max_order, filter_kX=DEFAULT_FILTER_KX):
    """X-derivatives 0..max_order of U at X, from the frame's physical field."""
    u = frame.physical
    a, b = exponents(frame.family)
    s = frame.s
    uh = np.fft.rfft(u.values) * jet_filter(u.grid, s, frame.family, filter_kX)
    x = frame.mod.xi + np.exp(-a * s) * X
    out = fourier_eval_orders(uh, u.grid, x, range(max_order + 1))
    out[0] -= frame.mod.kappa
    n = np.arange(max_order + 1)[:, None]
    return np.exp(-(a * n - b) * s) * out


def bootstrap_monitor(frame: SelfSimilarFrame, thresholds: MonitorThresholds | None = None):
    """Evaluate the a-priori inequality families on one frame.

    Returns ``{family id: Verdict}``. Families needing derivatives beyond
    the frame's stored jet use ``frame.physical`` (required).
    """
    th = thresholds or MonitorThresholds()
    if frame.physical is None:
        raise ValueError("bootstrap_monitor needs frame.physical")
    s = frame.s
    a_exp, b_exp = exponents(frame.family)
    jet = frame.origin_jet
    out = {}
    out["constraints"] = _verdict("constraints", [jet[0], jet[1] + 1.0, jet[4]],
                                  th.constraint_tol)
    ref0 = np.concatenate([[0.0], ui_derivatives(0.0, 2, 5)])
    out["origin_a"] = _verdict("origin_a", jet[2], th.origin_a * np.exp(-0.75 * s))
    out["origin_b"] = _verdict("origin_b", jet[3], th.origin_b * np.exp(-s))
    out["origin_nu"] = _verdict("origin_nu", jet[5] - ref0[5], th.origin_nu)

    # near field |X| <= l
    Xn = np.linspace(-th.l, th.l, 2 * (th.n_samples // 2) + 1)
    Dn = _frame_derivatives(frame, Xn, 8)
    Un = np.vstack([ui_eval(Xn, 2)[None, :], ui_derivatives(Xn, 2, 8)])
    tilde = Dn - Un
    vals, bnds = [], []
    for n in range(6):
        vals.append(tilde[n])
        bnds.append(th.near * np.abs(Xn) ** (6 - n) + th.near_floor)
    out["near_0_5"] = _verdict("near_0_5", np.concatenate(vals), np.concatenate(bnds))
    hi = [th.near_high, th.M * th.near_high, th.M ** 3 * th.near_high]
    out["near_6_8"] = _verdict("near_6_8", np.concatenate(tilde[6:9]),
                               np.concatenate([np.full(Xn.size, c) for c in hi]))

    # middle field l <= |X| <= min(e^{5s/4}/2, x_middle_max)
    x_far = 0.5 * np.exp(a_exp * s)
    x_hi = min(x_far, th.x_middle_max)
    half = np.geomspace(th.l, x_hi, th.n_samples)
    Xm = np.concatenate([-half[::-1], half])
    Dm = _frame_derivatives(frame, Xm, 8)
    w = (1.0 + Xm ** 4) ** -0.2
    out["middle_U"] = _verdict("middle_U", Dm[0] - ui_eval(Xm, 2),
                               th.middle_U * (1.0 + Xm ** 4) ** 0.05)
    out["middle_1x"] = _verdict("middle_1x", Dm[1] - ui_derivatives(Xm, 2, 1)[0],
                                th.middle_1x * w)
    out["middle_nx"] = _verdict("middle_nx", np.concatenate(Dm[2:9]),
                                np.concatenate([th.M ** (n * n) * w for n in range(2, 9)]))

    # far field and global norms from the physical field
    u = frame.physical
    g = u.grid
    uh = np.fft.rfft(u.values)
    ik = 1j * g.k
    far = np.abs(g.x - frame.mod.xi) >= x_far * np.exp(-a_exp * s)
    ux = np.fft.irfft(ik * uh, g.n_points)
    out["far_1x"] = _verdict("far_1x", np.exp(-s) * ux[far], th.far_1x * np.exp(-s))
    far_n = []
    for n in range(2, 9):
        dn = np.fft.irfft((ik ** n) * uh * jet_filter(g, s, frame.family), g.n_points)[far]
        far_n.append((np.exp(-(a_exp * n - b_exp) * s) * dn,
                      2.0 * th.M ** (n * n) * np.exp(-s)))
    out["far_nx"] = _verdict("far_nx", np.concatenate([v for v, _ in far_n]),
                             np.concatenate([np.full(v.size, c) for v, c in far_n]))
    l2 = np.exp(-3.0 * s / 8.0) * np.sqrt(g.spacing * np.sum(ux ** 2))
    out["l2_1x"] = _verdict("l2_1x", l2, th.l2_1x)
    d9 = np.fft.irfft((ik ** 9) * uh * jet_filter(g, s, frame.family), g.n_points)
    l2_9 = np.exp(-(9 * a_exp - b_exp) * s) * np.sqrt(g.spacing * np.sum(d9 ** 2)) \
        * np.exp(a_exp * s / 2.0)
    out["l2_9x"] = _verdict("l2_9x", l2_9, th.M ** 70)
    out["linf_u"] = _verdict("linf_u", np.max(np.abs(u.values)), th.M)
    return out


def l2_of_UX(frame) -> float:
    """||U_X(., s)||_{L^2(R)} = e^{-3s/8} ||u_x||_{L^2} from the physical field."""
    u = frame.physical
    g = u.grid
    ux = np.fft.irfft(1j * g.k * np.fft.rfft(u.values), g.n_points)
    return float(np.exp(-3.0 * frame.s / 8.0) * np.sqrt(g.spacing * np.sum(ux ** 2)))


def aggregate_verdicts(per_frame):
    """Combine per-frame verdict maps into {id: {pass_rate, worst_margin, ...}}."""
    out = {}
    for vm in per_frame:
        for key, v in vm.items():
            d = out.setdefault(key, {"n_frames": 0, "n_pass": 0, "worst_margin": np.inf,
                                     "hard": v.hard})
            d["n_frames"] += 1
            d["n_pass"] += int(v.passed)
            d["worst_margin"] = min(d["worst_margin"], v.worst_margin)
    for d in out.values():
        d["pass_rate"] = d["n_pass"] / d["n_frames"]
    return out


# --- run report --------------------------------------------------------------

@dataclass
class RunReport:
    T_star: float
    x_star: float
    holder_exponent: float | None
    holder_stderr: float | None
    holder_window: tuple
    gradient_rate_band: tuple
    decay_fits: dict
    decay_window: tuple
    nu_estimate: float
    profile_errors: list
    bootstrap_verdicts: dict
    resolved_window: tuple
    stop_reason: str
    notes: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def as_dict(self):
        return _jsonable(asdict(self))

    def to_json(self, path=None, indent=2):
        text = json.dumps(self.as_dict(), indent=indent)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass(frozen=True)
class DiagnosticsConfig:
    holder_r_min: float = 0.005
    holder_r_max: float = 0.5
    profile_half_width: float = 5.0
    decay_s_min: float | None = None
    decay_s_max: float | None = None
    decay_end_margin: float = 0.5
    resolution_tol: float = 1e-9
    monitor_M: float = 4.0
    monitor_middle_1x: float = 0.5


def resolved_window(traj, tol: float):
    """[s_first, s_last] of the initial run of records with spectral tail <= tol."""
    s = traj.records["s"]
    ok = traj.records["tail"] <= tol
    bad = np.nonzero(~ok)[0]
    end = bad[0] if bad.size else s.size
    if end == 0:
        return (float(s[0]), float(s[0]))
    # the record sequence of s is increasing up to the stop; clip any late non-monotone tail
    ss = s[:end]
    inc = np.nonzero(np.diff(ss) <= 0)[0]
    if inc.size:
        end = inc[0] + 1
    return float(s[0]), float(s[end - 1])


def analyze_run(traj, cfg: DiagnosticsConfig = DiagnosticsConfig(), epsilon: float | None = None,
                config_dump: dict | None = None) -> RunReport:
    """RunReport for a trajectory that ran to the slope limit with frames captured."""
    notes = []
    r = traj.records
    s = r["s"]
    T, xs = blowup_estimate(traj)
    band = gradient_rate_monitor(traj, T)
    win = resolved_window(traj, cfg.resolution_tol)
    lo = win[0] if cfg.decay_s_min is None else cfg.decay_s_min
    hi = (win[1] - cfg.decay_end_margin) if cfg.decay_s_max is None else cfg.decay_s_max
    sel = (s >= lo) & (s <= hi)
    fits = {}
    for name, order in (("d2U0", 2), ("d3U0", 3)):
        env = running_envelope(traj.jets[sel, order])
        try:
            rate, err = fit_decay(s[sel], env)
            fits[name] = {"rate": rate, "stderr": err}
        except (WindowTooNarrow, NonPositiveValues) as exc:
            fits[name] = {"rate": None, "stderr": None}
            notes.append(f"decay fit {name}: {exc}")
    frames = [f for f in traj.frames if f.U is not None and f.s <= win[1]]
    prof = []
    nu = float(traj.jets[sel][-1, 5]) if np.any(sel) else float(traj.jets[-1, 5])
    if len(frames) >= 3 and frames[-1].s - frames[0].s >= 1.0:
        ps = profile_convergence(frames, cfg.profile_half_width)
        prof = list(zip(ps.s.tolist(), ps.errors.tolist()))
        nu = ps.nu_hat
    else:
        notes.append("profile convergence skipped: fewer than 3 resolved frames over 1 unit of s")
    holder = (None, None)
    try:
        holder = holder_fit(traj.final, xs, (cfg.holder_r_min, cfg.holder_r_max))
    except (WindowTooNarrow, ValueError) as exc:
        notes.append(f"holder fit: {exc}")
    eps = epsilon if epsilon is not None else float(np.exp(-s[0]))
    th = MonitorThresholds.from_epsilon(eps, cfg.monitor_M, middle_1x=cfg.monitor_middle_1x)
    verdicts = aggregate_verdicts([bootstrap_monitor(f, th) for f in frames
                                   if f.physical is not None])
    return RunReport(T, xs, holder[0], holder[1], (cfg.holder_r_min, cfg.holder_r_max), band,
                     fits, (float(lo), float(hi)), nu, prof, verdicts, win,
                     traj.stop_reason, notes, config_dump or {})


def max_origin_residual(traj, s_lo: float, s_hi: float) -> float:
    """max over s in [s_lo, s_hi] of max(|U''(0,s)|, |U'''(0,s)|)."""
    s = traj.records["s"]
    sel = (s >= s_lo) & (s <= s_hi)
    if not np.any(sel):
        raise WindowTooNarrow(f"no records with s in [{s_lo}, {s_hi}]")
    return float(np.max(np.abs(traj.jets[sel][:, 2:4])))


def shot_separation(shot, unshot, s_lo: float, s_hi: float) -> dict:
    """Ratio of the unshot to the shot run's maximal origin residual over a window."""
    a = max_origin_residual(shot, s_lo, s_hi)
    b = max_origin_residual(unshot, s_lo, s_hi)
    return {"shot_max": a, "unshot_max": b, "ratio": b / a if a > 0 else float("inf")}
