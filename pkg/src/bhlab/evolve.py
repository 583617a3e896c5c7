r"""Pseudo-spectral RK4 solver for :math:`u_t + u u_x = H[u]`.

The state is stored as rfft coefficients projected onto the 2/3-rule band,
so the scheme is a Fourier-Galerkin truncation: the quadratic term
:math:`-\tfrac12\partial_x P(u^2)` is alias free and the semi-discrete flow
conserves :math:`\|u\|_{L^2}` exactly.

Tangent (first parameter-derivative) fields obey
:math:`v_t + \partial_x(u v) = H[v]`; they are stacked under the state and
advanced through the same RK4 stages, which makes them the exact derivative
of the discrete map.

The step size is fixed for a run, ``dt = cfl * h / max(1, |u0|_inf)``, so
that the discrete solution depends smoothly on the initial data.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CflViolation, NonFiniteState
from .grid import Field, Grid1D, derivative_multiplier, jet_from_hat
from .hilbert import (HilbertMethod, _padded_values, hilbert_multiplier,
                      hilbert_pv)
from .selfsim import (DEFAULT_FILTER_KX, ModulationState, SelfSimilarFrame,
                      extract_modulation_hat, frame_from_hat, jet_filter,
                      modulation_rhs)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvolveConfig:
    cfl: float = 0.4
    dealias: bool = True
    stop_slope: float | None = None
    t_max: float = float("inf")
    s_max: float = float("inf")
    output_every: int = 10
    hilbert: HilbertMethod = HilbertMethod()
    family: int = 2
    filter_kX: float = DEFAULT_FILTER_KX
    frame_every: int = 0
    frame_half_width: float = 8.0
    frame_points: int = 256
    snapshot_every: int = 0
    resolution_tol: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.cfl <= 0.5:
            raise ValueError("cfl must lie in (0, 0.5]")
        if int(self.output_every) < 1:
            raise ValueError("output_every must be a positive integer")

    def slope_limit(self, epsilon: float) -> float:
        lim = 50.0 / epsilon if self.stop_slope is None else self.stop_slope
        if lim <= 1.0 / epsilon:
            raise ValueError("stop_slope must exceed the initial steepness 1/epsilon")
        return lim


@dataclass
class TangentPair:
    u: Field
    v_alpha: Field
    v_beta: Field


class Solver:
    """Right-hand side and RK4 stepping on stacked rfft arrays.

    Row 0 of a stacked array is the solution; further rows are tangents.
    ``advection_speed`` replaces the Burgers flux by ``c u_x`` (linear test
    surrogate).
    """

    def __init__(self, grid: Grid1D, hilbert: HilbertMethod = HilbertMethod(),
                 dealias: bool = True, advection_speed: float | None = None):
        self.grid = grid
        self.n = grid.n_points
        self.hilbert = hilbert
        self.mask = grid.dealias_mask() if dealias else np.ones(self.n // 2 + 1, bool)
        self.ik = derivative_multiplier(grid, 1)
        self.flux = -0.5 * self.ik * self.mask
        self.hmult = hilbert_multiplier(self.n)
        self.c = advection_speed

    def project(self, uh: np.ndarray) -> np.ndarray:
        return uh * self.mask

    def hilbert_hat(self, U: np.ndarray, phys: np.ndarray | None = None) -> np.ndarray:
        kind = self.hilbert.kind
        if kind == "spectral":
            return self.hmult * U
        if kind == "none":
            return np.zeros_like(U)
        if phys is None:
            phys = np.fft.irfft(U, self.n, axis=-1)
        phys = np.atleast_2d(phys)
        if kind == "padded":
            out = np.array([_padded_values(p, self.hilbert.pad_factor) for p in phys])
        else:
            out = np.array([hilbert_pv(Field(self.grid, p), self.hilbert.near_radius_rule).values
                            for p in phys])
        out = np.fft.rfft(out, axis=-1) * self.mask
        return out.reshape(U.shape)

    def rhs(self, U: np.ndarray) -> np.ndarray:
        """Time derivative of a stacked state (shape (m, n//2+1) or (n//2+1,))."""
        if self.c is not None:
            return -self.c * self.ik * U * self.mask + self.hilbert_hat(U)
        single = U.ndim == 1
        U2 = np.atleast_2d(U)
        phys = np.fft.irfft(U2, self.n, axis=-1)
        prod = np.empty_like(phys)
        prod[0] = phys[0] * phys[0]
        if U2.shape[0] > 1:
            prod[1:] = 2.0 * phys[0] * phys[1:]
        out = self.flux * np.fft.rfft(prod, axis=-1)
        out += self.hilbert_hat(U2, phys)
        return out[0] if single else out

    def rk4(self, U: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.rhs(U)
        k2 = self.rhs(U + 0.5 * dt * k1)
        k3 = self.rhs(U + 0.5 * dt * k2)
        k4 = self.rhs(U + dt * k3)
        return U + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def to_field(self, uh, label="u", time=0.0) -> Field:
        return Field(self.grid, np.fft.irfft(uh, self.n), label, time)


def stable_dt(grid: Grid1D, u_sup: float, cfl: float) -> float:
    return cfl * grid.spacing / max(1.0, u_sup)


def rhs_physical(u: Field, hilbert: HilbertMethod = HilbertMethod(),
                 dealias: bool = True) -> Field:
    """-P(u u_x) + H[u] evaluated on a field."""
    s = Solver(u.grid, hilbert, dealias)
    return s.to_field(s.rhs(np.fft.rfft(u.values)), "u_t", u.time)


def _check_cfl(u: Field, dt: float, cfg: EvolveConfig):
    limit = stable_dt(u.grid, u.sup_norm(), cfg.cfl)
    if dt > limit * (1.0 + 1e-12):
        raise CflViolation(f"dt = {dt:.3g} exceeds the CFL limit {limit:.3g}")


def step(u: Field, dt: float, cfg: EvolveConfig = EvolveConfig(),
         solver: Solver | None = None) -> Field:
    """One classical RK4 step of the dealiased equation."""
    _check_cfl(u, dt, cfg)
    solver = solver or Solver(u.grid, cfg.hilbert, cfg.dealias)
    uh = solver.rk4(solver.project(np.fft.rfft(u.values)), dt)
    return solver.to_field(uh, u.label, u.time + dt)


def step_tangent(pair: TangentPair, dt: float, cfg: EvolveConfig = EvolveConfig(),
                 solver: Solver | None = None) -> TangentPair:
    """RK4 step of the solution together with its two tangent fields."""
    _check_cfl(pair.u, dt, cfg)
    solver = solver or Solver(pair.u.grid, cfg.hilbert, cfg.dealias)
    U = solver.project(np.fft.rfft(np.stack([pair.u.values, pair.v_alpha.values,
                                             pair.v_beta.values]), axis=-1))
    U = solver.rk4(U, dt)
    t = pair.u.time + dt
    return TangentPair(solver.to_field(U[0], pair.u.label, t),
                       solver.to_field(U[1], pair.v_alpha.label, t),
                       solver.to_field(U[2], pair.v_beta.label, t))


# --- observation records -----------------------------------------------------

RECORD_KEYS = ("t", "step", "s", "tau", "xi", "kappa", "tau_dot", "xi_dot", "kappa_dot",
               "slope", "l2", "linf", "tail")


@dataclass
class Trajectory:
    """Output of :func:`run`.

    ``records`` maps column names to arrays (one entry per output time);
    ``jets[k]`` is the origin jet (X-derivatives 0..9) and ``hjets[k]`` the
    Hilbert jet at output k.
    """

    grid: Grid1D
    t0: float
    dt: float
    records: dict
    jets: np.ndarray
    hjets: np.ndarray
    frames: list
    snapshots: list
    final: Field
    stop_reason: str
    family: int = 2
    config: EvolveConfig | None = None
    mods: list = field(default_factory=list)

    def __len__(self):
        return len(self.records["t"])

    def column(self, name):
        return self.records[name]

    def resolved(self, tol: float | None = None) -> np.ndarray:
        tol = self.config.resolution_tol if tol is None and self.config else (tol or 1e-9)
        return self.records["tail"] <= tol

    def origin(self, order: int) -> np.ndarray:
        return self.jets[:, order]

    def save(self, path):
        """Write records, jets, the final field and captured frames to ``.npz``."""
        g = self.grid
        data = {f"rec_{k}": v for k, v in self.records.items()}
        data.update(jets=self.jets, hjets=self.hjets, final=self.final.values,
                    grid=np.array([g.x_min, g.x_max, g.n_points]),
                    meta=np.array([self.t0, self.dt, self.final.time, self.family]),
                    stop_reason=np.array(self.stop_reason or ""))
        fr = [f for f in self.frames if f.U is not None]
        if fr:
            Xg = fr[0].U.grid
            data.update(
                frame_X=np.array([Xg.x_min, Xg.x_max, Xg.n_points]),
                frame_s=np.array([f.s for f in fr]),
                frame_mod=np.array([[f.mod.t, f.mod.tau, f.mod.xi, f.mod.kappa,
                                     *(np.nan if v is None else v for v in
                                       (f.mod.tau_dot, f.mod.xi_dot, f.mod.kappa_dot))]
                                    for f in fr]),
                frame_jet=np.array([f.origin_jet for f in fr]),
                frame_hjet=np.array([f.hilbert_jet if f.hilbert_jet is not None
                                     else np.full(6, np.nan) for f in fr]),
                frame_U=np.array([f.U.values for f in fr]),
                frame_dU=np.array([f.dU.values for f in fr]),
                frame_u=np.array([f.physical.values if f.physical is not None
                                  else np.full(g.n_points, np.nan) for f in fr]))
        np.savez_compressed(path, **data)

    @classmethod
    def load(cls, path) -> "Trajectory":
        d = np.load(path)
        x0, x1, n = d["grid"]
        grid = Grid1D(float(x0), float(x1), int(n))
        t0, dt, t_final, family = d["meta"]
        family = int(family)
        records = {k[4:]: d[k] for k in d.files if k.startswith("rec_")}
        frames = []
        if "frame_s" in d.files:
            a, b, m = d["frame_X"]
            Xg = Grid1D(float(a), float(b), int(m))
            for k, s in enumerate(d["frame_s"]):
                t, tau, xi, kappa, td, xd, kd = d["frame_mod"][k]
                rates = [None if np.isnan(v) else float(v) for v in (td, xd, kd)]
                mod = ModulationState(float(t), float(tau), float(xi), float(kappa), *rates)
                u = d["frame_u"][k]
                phys = None if np.isnan(u[0]) else Field(grid, u, "u", float(t))
                hj = d["frame_hjet"][k]
                frames.append(SelfSimilarFrame(
                    float(s), mod, d["frame_jet"][k], family,
                    Field(Xg, d["frame_U"][k], "U", float(s)),
                    Field(Xg, d["frame_dU"][k], "U_X", float(s)),
                    None if np.isnan(hj[0]) else hj, None, phys))
        final = Field(grid, d["final"], "u", float(t_final))
        return cls(grid, float(t0), float(dt), records, d["jets"], d["hjets"], frames, [],
                   final, str(d["stop_reason"]), family, None)


class Integrator:
    """Stateful stepping of a stacked state with deterministic step sizes."""

    def __init__(self, solver: Solver, U0: np.ndarray, t0: float, dt: float,
                 family: int = 2, filter_kX=DEFAULT_FILTER_KX):
        self.solver = solver
        self.U = np.array(U0, copy=True)
        self.t0 = float(t0)
        self.dt = float(dt)
        self.nsteps = 0
        self.family = family
        self.filter_kX = filter_kX
        self.mod: ModulationState | None = None

    @property
    def t(self) -> float:
        return self.t0 + self.nsteps * self.dt

    @property
    def uh(self) -> np.ndarray:
        return self.U[0] if self.U.ndim == 2 else self.U

    def copy(self) -> "Integrator":
        other = Integrator(self.solver, self.U, self.t0, self.dt, self.family, self.filter_kX)
        other.nsteps = self.nsteps
        other.mod = self.mod
        return other

    def advance(self, n: int = 1):
        for _ in range(n):
            self.U = self.solver.rk4(self.U, self.dt)
            self.nsteps += 1
        if not np.all(np.isfinite(self.uh)):
            raise NonFiniteState(f"non-finite state at t = {self.t:.6g} (step {self.nsteps})",
                                 dump={"t": self.t, "step": self.nsteps})

    def extract(self, s_filter=None) -> ModulationState:
        mod, _ = extract_modulation_hat(self.uh, self.solver.grid, self.t, self.mod,
                                        self.family, filter_kX=self.filter_kX,
                                        s_filter=s_filter)
        self.mod = mod
        return mod

    def advance_to_s(self, s_target: float):
        """Integrate until s = s_target exactly.

        The integrator is left at the last full step before the crossing;
        the returned ``(U, t, mod)`` is the state after the fractional final
        step, with extraction filtered at ``s_target``.
        """
        from scipy.optimize import brentq

        if self.mod is None:
            self.extract()
        if self.mod.s >= s_target:
            raise ValueError("integrator already past the target")
        chunk = 8
        while True:
            saved = (self.U, self.nsteps, self.mod)
            self.advance(chunk)
            if self.extract().s >= s_target:
                self.U, self.nsteps, self.mod = saved
                break
        while True:
            saved = (self.U, self.nsteps, self.mod)
            self.advance(1)
            if self.extract().s >= s_target:
                self.U, self.nsteps, self.mod = saved
                break
        base_U, base_t, hint = self.U, self.t, self.mod
        grid = self.solver.grid

        def state(delta):
            U = self.solver.rk4(base_U, delta) if delta > 0 else base_U
            uh = U[0] if U.ndim == 2 else U
            mod, _ = extract_modulation_hat(uh, grid, base_t + delta, hint, self.family,
                                            filter_kX=self.filter_kX, s_filter=s_target)
            return U, mod

        def f(delta):
            return state(delta)[1].s - s_target

        delta = brentq(f, 0.0, self.dt, xtol=1e-15 * self.dt, rtol=4 * np.finfo(float).eps, maxiter=100)
        U, mod = state(delta)
        return U, base_t + delta, mod


def _tail_ratio(uh: np.ndarray, mask: np.ndarray) -> float:
    kept = np.abs(uh[mask])
    top = kept[int(0.8 * kept.size):]
    return float(top.max() / max(kept.max(), 1e-300))


def observe(solver: Solver, uh: np.ndarray, t: float, mod: ModulationState,
            family: int = 2, filter_kX=DEFAULT_FILTER_KX, X_grid=None,
            s_filter=None) -> SelfSimilarFrame:
    """Frame with origin and Hilbert jets and modulation rates at one time."""
    hh = solver.hilbert_hat(uh)
    frame = frame_from_hat(uh, solver.grid, mod, X_grid, family, filter_kX,
                           hilbert_hat=hh, s_filter=s_filter)
    if family == 2:
        tau_dot, xi_dot, kappa_dot = modulation_rhs(frame, frame.hilbert_jet[[0, 1, 4]])
        frame.mod = mod.with_rates(tau_dot, xi_dot, kappa_dot)
    return frame


def run(u0: Field, t0: float, cfg: EvolveConfig = EvolveConfig(), epsilon: float | None = None,
        tangents=None, solver: Solver | None = None) -> Trajectory:
    """Integrate from ``(u0, t0)`` until the slope limit, ``t_max`` or ``s_max``.

    At every ``output_every`` steps the modulation variables are extracted
    and a record is appended. ``epsilon`` sets the default slope limit
    50/epsilon (taken from the initial slope if omitted).
    """
    solver = solver or Solver(u0.grid, cfg.hilbert, cfg.dealias)
    grid = u0.grid
    uh0 = solver.project(np.fft.rfft(u0.values))
    if tangents is not None:
        U0 = np.stack([uh0] + [solver.project(np.fft.rfft(v.values)) for v in tangents])
    else:
        U0 = uh0
    dt = stable_dt(grid, u0.sup_norm(), cfg.cfl)
    integ = Integrator(solver, U0, t0, dt, cfg.family, cfg.filter_kX)
    mod0 = integ.extract()
    if epsilon is None:
        epsilon = mod0.tau - t0
    slope_limit = cfg.slope_limit(epsilon)
    X_grid = Grid1D.symmetric(cfg.frame_half_width, cfg.frame_points) if cfg.frame_every else None

    rows = {k: [] for k in RECORD_KEYS}
    jets, hjets, frames, snapshots, mods = [], [], [], [], []
    n_out = 0
    stop = None
    while True:
        uh = integ.uh
        t = integ.t
        mod = integ.extract() if n_out else mod0
        want_frame = bool(cfg.frame_every) and n_out % cfg.frame_every == 0
        frame = observe(solver, uh, t, mod, cfg.family, cfg.filter_kX,
                        X_grid if want_frame else None)
        ux = np.fft.irfft(uh * solver.ik, grid.n_points)
        u = np.fft.irfft(uh, grid.n_points)
        slope = float(np.max(np.abs(ux)))
        m = frame.mod
        for key, val in (("t", t), ("step", integ.nsteps), ("s", m.s), ("tau", m.tau),
                         ("xi", m.xi), ("kappa", m.kappa),
                         ("tau_dot", m.tau_dot if m.tau_dot is not None else np.nan),
                         ("xi_dot", m.xi_dot if m.xi_dot is not None else np.nan),
                         ("kappa_dot", m.kappa_dot if m.kappa_dot is not None else np.nan),
                         ("slope", slope),
                         ("l2", float(np.sqrt(grid.spacing * np.sum(u * u)))),
                         ("linf", float(np.max(np.abs(u)))),
                         ("tail", _tail_ratio(uh, solver.mask))):
            rows[key].append(val)
        jets.append(frame.origin_jet)
        hjets.append(frame.hilbert_jet)
        mods.append(m)
        if want_frame:
            frame.physical = Field(grid, u, "u", t)
            frames.append(frame)
        if cfg.snapshot_every and n_out % cfg.snapshot_every == 0:
            snapshots.append(Field(grid, u, "u", t))
        n_out += 1
        if len(rows["s"]) > 1 and not rows["s"][-1] > rows["s"][-2]:
            log.warning("self-similar time not increasing at t = %.6g", t)
        if slope >= slope_limit:
            stop = "stop_slope"
        elif t >= cfg.t_max:
            stop = "t_max"
        elif m.s >= cfg.s_max:
            stop = "s_max"
        if stop:
            break
        try:
            integ.advance(cfg.output_every)
        except NonFiniteState as exc:
            exc.dump.update({"last_finite_u": u, "x": grid.x})
            raise
    final = Field(grid, np.fft.irfft(integ.uh, grid.n_points), "u", integ.t)
    if cfg.frame_every and (not frames or frames[-1].s != rows["s"][-1]):
        fr = observe(solver, integ.uh, integ.t, mods[-1], cfg.family, cfg.filter_kX, X_grid)
        fr.physical = final
        frames.append(fr)
    records = {k: np.array(v, dtype=float) for k, v in rows.items()}
    traj = Trajectory(grid, t0, dt, records, np.array(jets),
                      np.array([h if h is not None else np.full(6, np.nan) for h in hjets]),
                      frames, snapshots, final, stop, cfg.family, cfg, mods)
    traj.tangent_state = integ.U[1:] if integ.U.ndim == 2 else None
    return traj


def physical_jet(uh: np.ndarray, grid: Grid1D, x0: float, s: float, family: int = 2,
                 filter_kX=DEFAULT_FILTER_KX, max_order: int = 9) -> np.ndarray:
    """Filtered physical derivatives at ``x0`` (filter set by self-similar time s)."""
    return jet_from_hat(uh * jet_filter(grid, s, family, filter_kX), grid, x0, max_order)
