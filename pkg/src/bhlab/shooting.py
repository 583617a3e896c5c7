r"""Newton shooting on the two unstable origin directions.

For a datum with parameters :math:`(\alpha, \beta)` the map

.. math::  T_n(\alpha, \beta) = (\partial_X^2 U(0, s_n), \partial_X^3 U(0, s_n)),
           \qquad s_n = -\log\varepsilon + n,

is driven to zero by Newton's method at each checkpoint in turn, seeded by
the previous checkpoint's solution.

Evaluating :math:`T_n` integrates the physical equation from
:math:`t_0 = -\varepsilon` to the time at which the extracted
:math:`s = -\log(\tau - t)` equals :math:`s_n` exactly (a fractional last
RK4 step). The Jacobian comes from tangent fields evolved alongside
(variational mode) or from central differences; in variational mode the
moving constraints are differentiated by the implicit function theorem:
with :math:`r = u_t`,

.. math::

    \begin{pmatrix} u_{5x} & r_{4x} \\ u_{2x} & r_{x} \end{pmatrix}
    \begin{pmatrix} \xi' \\ t' \end{pmatrix}
    = -\begin{pmatrix} v_{4x} \\ v_{x} \end{pmatrix},

and :math:`\partial_\alpha \partial_x^m u(\xi, t) = v_{mx} + u_{(m+1)x}\xi' + r_{mx} t'`.
"""
from __future__ import annotations

import json
import logging
import time
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import (DegenerateModulation, JacobianDisagreement, MaxItersExceeded,
                     NonFiniteState, SingularJacobian, TargetBeyondBlowup,
                     TrustRegionExceeded)
from .evolve import Integrator, Solver, stable_dt
from .grid import Grid1D, jet_from_hat
from .hilbert import HilbertMethod
from .initdata import (InitConfig, build_initial_physical, datum_origin_jet,
                       parameter_direction, shooting_start)
from .selfsim import DEFAULT_FILTER_KX, exponents, jet_filter

log = logging.getLogger(__name__)

JACOBIAN_MODES = ("variational", "finite_difference", "both")


@dataclass(frozen=True)
class ShootConfig:
    init: InitConfig = InitConfig()
    n_checkpoints: int = 3
    checkpoint_spacing: float = 1.0
    newton_tol: float = 1e-8
    max_newton_iters: int = 8
    jacobian_mode: str = "variational"
    fd_step: float = 1e-4
    fd_check_checkpoints: int = 2
    jacobian_rel_tol: float = 0.05
    ratio_floor: float = 1e-9
    trust_radius_alpha: float | None = None
    trust_radius_beta: float | None = None
    n_points: int = 2 ** 16
    half_width: float = 2.0
    cfl: float = 0.4
    dealias: bool = True
    hilbert: HilbertMethod = HilbertMethod()
    filter_kX: float = DEFAULT_FILTER_KX
    slope_cap: float | None = None
    cache_size: int = 6
    jobs: int = 1

    def __post_init__(self):
        if int(self.n_checkpoints) < 1:
            raise ValueError("n_checkpoints must be >= 1")
        if not 1e-6 <= self.fd_step <= 1e-2:
            raise ValueError("fd_step must lie in [1e-6, 1e-2]")
        if self.jacobian_mode not in JACOBIAN_MODES:
            raise ValueError(f"jacobian_mode must be one of {JACOBIAN_MODES}")
        for r in (self.trust_radius_alpha, self.trust_radius_beta):
            if r is not None and not r > 0:
                raise ValueError("trust radii must be positive")
        if self.init.family != 2:
            raise ValueError("shooting is implemented for the U_2 family")

    @property
    def epsilon(self) -> float:
        return self.init.epsilon

    @property
    def s0(self) -> float:
        return self.init.s0

    def checkpoint(self, n: int) -> float:
        return self.s0 + n * self.checkpoint_spacing

    def trust_radii(self, n: int):
        """Rectangle half-widths for the move from checkpoint n to n+1."""
        eps = self.epsilon
        ds = n * self.checkpoint_spacing
        ra = self.trust_radius_alpha
        rb = self.trust_radius_beta
        if ra is None:
            ra = self.init.c_alpha * eps * np.exp(-1.75 * ds) + eps ** 1.2 * np.exp(-1.5 * ds)
        else:
            ra = ra * np.exp(-1.75 * ds)
        if rb is None:
            rb = self.init.c_beta * eps * np.exp(-1.5 * ds)
        else:
            rb = rb * np.exp(-1.5 * ds)
        return float(ra), float(rb)

    def grid(self) -> Grid1D:
        return Grid1D.symmetric(self.half_width, self.n_points)


@dataclass
class Evaluation:
    alpha: float
    beta: float
    s: float
    t: float
    residual: np.ndarray
    jacobian: np.ndarray | None = None
    xi: float = 0.0
    kappa: float = 0.0


@dataclass
class CheckpointRecord:
    n: int
    s_n: float
    alpha: float
    beta: float
    r2: float
    r3: float
    jacobian: list
    det: float
    newton_iters: int
    step_norm: float
    residual_history: list = field(default_factory=list)
    error_ratios: list = field(default_factory=list)
    jacobian_fd: list | None = None
    jacobian_rel_diff: float | None = None
    trust_radii: tuple | None = None
    t_n: float | None = None
    wall_seconds: float = 0.0

    def as_dict(self):
        return asdict(self)


@dataclass
class ShootResult:
    alpha_star: float
    beta_star: float
    trace: list
    config: ShootConfig

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.trace:
                fh.write(json.dumps(rec.as_dict()) + "\n")


class ShootingProblem:
    """Residual and Jacobian evaluations with a prefix cache keyed on (alpha, beta)."""

    def __init__(self, cfg: ShootConfig):
        self.cfg = cfg
        self.grid = cfg.grid()
        self.solver = Solver(self.grid, cfg.hilbert, cfg.dealias)
        a0, b0 = shooting_start(cfg.init)
        u_seed = build_initial_physical(cfg.init.with_params(a0, b0), self.grid)
        # one step size for every probe keeps the discrete map smooth in (alpha, beta)
        self.dt = stable_dt(self.grid, 1.25 * u_seed.sup_norm(), cfg.cfl)
        self._cache: OrderedDict = OrderedDict()
        self.n_runs = 0

    def _fresh(self, alpha, beta, tangents: bool) -> Integrator:
        icfg = self.cfg.init.with_params(alpha, beta)
        u0 = build_initial_physical(icfg, self.grid)
        rows = [u0.values]
        if tangents:
            rows += [parameter_direction(icfg, self.grid, "alpha").values,
                     parameter_direction(icfg, self.grid, "beta").values]
        U = self.solver.project(np.fft.rfft(np.array(rows), axis=-1))
        U = U if tangents else U[0]
        self.n_runs += 1
        return Integrator(self.solver, U, icfg.t0, self.dt, 2, self.cfg.filter_kX)

    def _integrator(self, alpha, beta, s_target, tangents):
        key = (float(alpha), float(beta), bool(tangents))
        integ = self._cache.pop(key, None)
        if integ is not None and integ.mod is not None and integ.mod.s >= s_target:
            integ = None
        if integ is None:
            integ = self._fresh(alpha, beta, tangents)
        self._cache[key] = integ
        while len(self._cache) > self.cfg.cache_size:
            self._cache.popitem(last=False)
        return integ

    def evaluate(self, alpha, beta, s_target, tangents=True) -> Evaluation:
        """Residual (and variational Jacobian if ``tangents``) at ``s_target``."""
        if abs(s_target - self.cfg.s0) < 1e-14:
            return self._evaluate_initial(alpha, beta, tangents)
        integ = self._integrator(alpha, beta, s_target, tangents)
        try:
            U, t, mod = self._advance(integ, s_target)
        except (DegenerateModulation, NonFiniteState) as exc:
            raise TargetBeyondBlowup(f"could not reach s = {s_target}: {exc}") from exc
        uh = U[0] if U.ndim == 2 else U
        filt = jet_filter(self.grid, s_target, 2, self.cfg.filter_kX)
        ju = jet_from_hat(uh * filt, self.grid, mod.xi, 6)
        a_exp, b_exp = exponents(2)
        sc2 = np.exp(-(2 * a_exp - b_exp) * s_target)
        sc3 = np.exp(-(3 * a_exp - b_exp) * s_target)
        res = np.array([sc2 * ju[2], sc3 * ju[3]])
        J = None
        if tangents:
            rh = self.solver.rhs(uh)
            jr = jet_from_hat(rh * filt, self.grid, mod.xi, 4)
            M = np.array([[ju[5], jr[4]], [ju[2], jr[1]]])
            J = np.empty((2, 2))
            for col in (0, 1):
                jv = jet_from_hat(U[1 + col] * filt, self.grid, mod.xi, 4)
                xi_p, t_p = np.linalg.solve(M, -np.array([jv[4], jv[1]]))
                J[0, col] = sc2 * (jv[2] + ju[3] * xi_p + jr[2] * t_p)
                J[1, col] = sc3 * (jv[3] + ju[4] * xi_p + jr[3] * t_p)
        return Evaluation(float(alpha), float(beta), float(s_target), float(t), res, J,
                          mod.xi, mod.kappa)

    def _advance(self, integ: Integrator, s_target):
        cap = self.cfg.slope_cap
        if cap is not None and np.exp(s_target) > cap:
            raise TargetBeyondBlowup(f"s = {s_target} needs slope e^s above the cap {cap}")
        return integ.advance_to_s(s_target)

    def _evaluate_initial(self, alpha, beta, tangents):
        icfg = self.cfg.init.with_params(alpha, beta)
        jet = datum_origin_jet(icfg)
        J = np.array([[2.0, 0.0], [0.0, 6.0]]) if tangents else None
        return Evaluation(float(alpha), float(beta), icfg.s0, icfg.t0, jet[2:4].copy(), J)

    def residual(self, alpha, beta, s_target) -> np.ndarray:
        return self.evaluate(alpha, beta, s_target, tangents=False).residual

    def jacobian_fd(self, alpha, beta, s_target, h=None) -> np.ndarray:
        h = self.cfg.fd_step if h is None else h
        probes = [(alpha + h, beta), (alpha - h, beta), (alpha, beta + h), (alpha, beta - h)]
        if self.cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=self.cfg.jobs) as pool:
                vals = list(pool.map(_probe, [(self.cfg, p, s_target) for p in probes]))
        else:
            vals = [self.residual(a, b, s_target) for a, b in probes]
        J = np.empty((2, 2))
        J[:, 0] = (vals[0] - vals[1]) / (2 * h)
        J[:, 1] = (vals[2] - vals[3]) / (2 * h)
        return J


def _probe(args):
    cfg, (a, b), s_target = args
    return ShootingProblem(cfg).residual(a, b, s_target)


def jacobian_rel_diff(J1: np.ndarray, J2: np.ndarray) -> float:
    """Largest entrywise relative difference, entries scaled by max(|J_ij|, 1e-3 |J|)."""
    scale = np.maximum(np.abs(J1), 1e-3 * np.linalg.norm(J1))
    return float(np.max(np.abs(J1 - J2) / scale))


def _check_singular(J):
    det = float(np.linalg.det(J))
    if abs(det) < 1e-12 * float(np.sum(J * J)):
        raise SingularJacobian(f"det J = {det:.3g}")
    return det


def residual(alpha, beta, s_target, problem: ShootingProblem):
    return problem.residual(alpha, beta, s_target)


def jacobian(alpha, beta, s_target, problem: ShootingProblem, mode: str | None = None):
    """2x2 derivative of the checkpoint map in the configured mode."""
    mode = mode or problem.cfg.jacobian_mode
    if mode == "finite_difference":
        J = problem.jacobian_fd(alpha, beta, s_target)
    else:
        J = problem.evaluate(alpha, beta, s_target, tangents=True).jacobian
        if mode == "both":
            Jfd = problem.jacobian_fd(alpha, beta, s_target)
            diff = jacobian_rel_diff(J, Jfd)
            if diff > problem.cfg.jacobian_rel_tol:
                raise JacobianDisagreement(f"variational vs finite difference differ by {diff:.3g}")
    _check_singular(J)
    return J


@dataclass
class NewtonOutcome:
    alpha: float
    beta: float
    iters: int
    evaluation: Evaluation
    jacobian: np.ndarray
    residual_history: list
    error_ratios: list
    step_norm: float


def newton_solve(alpha0, beta0, s_target, problem: ShootingProblem, center=None,
                 radii=None, mode: str | None = None) -> NewtonOutcome:
    """Damped Newton iteration for T(alpha, beta) = 0 at ``s_target``.

    Each step is clamped to the rectangle ``center +- radii`` (when given).
    ``iters`` counts Newton updates; a start that already meets the tolerance
    returns with zero.
    """
    cfg = problem.cfg
    mode = mode or cfg.jacobian_mode
    alpha, beta = float(alpha0), float(beta0)
    history = []
    for it in range(cfg.max_newton_iters + 1):
        ev = problem.evaluate(alpha, beta, s_target, tangents=(mode != "finite_difference"))
        if mode == "finite_difference":
            J = problem.jacobian_fd(alpha, beta, s_target)
        else:
            J = ev.jacobian
            if mode == "both":
                Jfd = problem.jacobian_fd(alpha, beta, s_target)
                diff = jacobian_rel_diff(J, Jfd)
                if diff > cfg.jacobian_rel_tol:
                    raise JacobianDisagreement(
                        f"variational vs finite difference differ by {diff:.3g}")
        _check_singular(J)
        norm = float(np.linalg.norm(ev.residual))
        history.append(norm)
        log.info("s=%.4f it=%d alpha=%.15g beta=%.15g |r|=%.3e", s_target, it, alpha, beta, norm)
        if norm <= cfg.newton_tol:
            # pairs whose later residual sits on the round-off floor carry no rate information
            ratios = [history[k + 1] / history[k] ** 2 for k in range(len(history) - 1)
                      if history[k + 1] > cfg.ratio_floor]
            step = float(np.hypot(alpha - alpha0, beta - beta0))
            return NewtonOutcome(alpha, beta, it, ev, J, history, ratios, step)
        if it == cfg.max_newton_iters:
            break
        delta = np.linalg.solve(J, -ev.residual)
        if radii is not None:
            c = (alpha0, beta0) if center is None else center
            lo = np.array([c[0] - radii[0], c[1] - radii[1]])
            hi = np.array([c[0] + radii[0], c[1] + radii[1]])
            new = np.clip(np.array([alpha, beta]) + delta, lo, hi)
        else:
            new = np.array([alpha, beta]) + delta
        alpha, beta = float(new[0]), float(new[1])
    raise MaxItersExceeded(f"Newton did not reach {cfg.newton_tol:g} in "
                           f"{cfg.max_newton_iters} iterations (|r| = {history[-1]:.3e})")


def initial_record(cfg: ShootConfig) -> CheckpointRecord:
    """Checkpoint 0: the seed parameters and the analytic map at s0."""
    a0, b0 = shooting_start(cfg.init)
    r = datum_origin_jet(cfg.init.with_params(a0, b0))[2:4]
    J = [[2.0, 0.0], [0.0, 6.0]]
    return CheckpointRecord(0, cfg.s0, a0, b0, float(r[0]), float(r[1]), J, 12.0, 0, 0.0,
                            t_n=cfg.init.t0)


def shoot_sequence(cfg: ShootConfig, problem: ShootingProblem | None = None,
                   progress=None) -> ShootResult:
    """Solve at s_1 .. s_N in turn, each seeded by the previous solution."""
    problem = problem or ShootingProblem(cfg)
    trace = [initial_record(cfg)]
    alpha, beta = trace[0].alpha, trace[0].beta
    for n in range(cfg.n_checkpoints):
        t_start = time.perf_counter()
        s_next = cfg.checkpoint(n + 1)
        radii = cfg.trust_radii(n)
        out = newton_solve(alpha, beta, s_next, problem, radii=radii)
        if abs(out.alpha - alpha) > radii[0] * (1 + 1e-12) or \
                abs(out.beta - beta) > radii[1] * (1 + 1e-12):
            raise TrustRegionExceeded(
                f"checkpoint {n + 1}: step ({out.alpha - alpha:.3g}, {out.beta - beta:.3g}) "
                f"leaves the rectangle {radii}")
        det = float(np.linalg.det(out.jacobian))
        rec = CheckpointRecord(n + 1, s_next, out.alpha, out.beta,
                               float(out.evaluation.residual[0]),
                               float(out.evaluation.residual[1]),
                               out.jacobian.tolist(), det, out.iters, out.step_norm,
                               out.residual_history, out.error_ratios,
                               trust_radii=radii, t_n=out.evaluation.t)
        if n < cfg.fd_check_checkpoints and cfg.jacobian_mode == "variational":
            Jfd = problem.jacobian_fd(out.alpha, out.beta, s_next)
            rec.jacobian_fd = Jfd.tolist()
            rec.jacobian_rel_diff = jacobian_rel_diff(out.jacobian, Jfd)
            if rec.jacobian_rel_diff > cfg.jacobian_rel_tol:
                raise JacobianDisagreement(
                    f"checkpoint {n + 1}: variational vs finite difference differ by "
                    f"{rec.jacobian_rel_diff:.3g}")
        rec.wall_seconds = time.perf_counter() - t_start
        trace.append(rec)
        if progress:
            progress(rec)
        alpha, beta = out.alpha, out.beta
    return ShootResult(alpha, beta, trace, cfg)


def step_sizes(trace) -> np.ndarray:
    """|alpha_{n+1} - alpha_n| and |beta_{n+1} - beta_n| along the trace (shape (N, 2))."""
    a = np.array([r.alpha if hasattr(r, "alpha") else r["alpha"] for r in trace])
    b = np.array([r.beta if hasattr(r, "beta") else r["beta"] for r in trace])
    return np.column_stack([np.abs(np.diff(a)), np.abs(np.diff(b))])


def read_trace(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def shot_config_for(cfg: ShootConfig, alpha, beta) -> InitConfig:
    return replace(cfg.init, alpha=float(alpha), beta=float(beta))
