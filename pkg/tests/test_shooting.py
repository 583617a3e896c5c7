import json

import numpy as np
import pytest

from bhlab.errors import MaxItersExceeded, SingularJacobian, TargetBeyondBlowup
from bhlab.initdata import InitConfig
from bhlab.shooting import (ShootConfig, ShootingProblem, initial_record, jacobian,
                            jacobian_rel_diff, newton_solve, read_trace, shoot_sequence,
                            step_sizes, _check_singular)

SMALL = dict(n_points=2 ** 12, fd_check_checkpoints=1)


@pytest.fixture(scope="module")
def problem():
    return ShootingProblem(ShootConfig(**SMALL))


@pytest.fixture(scope="module")
def one_checkpoint():
    cfg = ShootConfig(n_checkpoints=1, **SMALL)
    return shoot_sequence(cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        ShootConfig(n_checkpoints=0)
    with pytest.raises(ValueError):
        ShootConfig(fd_step=1.0)
    with pytest.raises(ValueError):
        ShootConfig(jacobian_mode="secant")
    with pytest.raises(ValueError):
        ShootConfig(init=InitConfig(family=1))
    cfg = ShootConfig()
    assert cfg.checkpoint(2) == pytest.approx(np.log(10.0) + 2.0)
    ra0, rb0 = cfg.trust_radii(0)
    ra1, rb1 = cfg.trust_radii(1)
    assert ra1 < ra0 and rb1 == pytest.approx(rb0 * np.exp(-1.5))


def test_initial_map_is_exact(problem):
    ev = problem.evaluate(0.01, -0.02, problem.cfg.s0)
    assert np.array_equal(ev.jacobian, [[2.0, 0.0], [0.0, 6.0]])
    assert np.allclose(ev.residual, [0.02, -0.12])
    rec = initial_record(problem.cfg)
    assert rec.n == 0 and rec.det == 12.0


def test_variational_matches_finite_difference(problem):
    s1 = problem.cfg.checkpoint(1)
    J = problem.evaluate(0.0, 0.0, s1).jacobian
    Jfd = problem.jacobian_fd(0.0, 0.0, s1)
    assert jacobian_rel_diff(J, Jfd) < 1e-3


def test_residual_cached_and_deterministic(problem):
    s1 = problem.cfg.checkpoint(1)
    r1 = problem.residual(0.001, 0.0, s1)
    runs = problem.n_runs
    r2 = problem.residual(0.001, 0.0, s1 - 0.5)
    r3 = ShootingProblem(problem.cfg).residual(0.001, 0.0, s1)
    assert problem.n_runs == runs + 1
    assert np.array_equal(r1, r3)
    assert not np.array_equal(r1, r2)


def test_newton_converges_quadratically(one_checkpoint):
    rec = one_checkpoint.trace[1]
    assert abs(rec.r2) <= 1e-8 and abs(rec.r3) <= 1e-8
    assert rec.det > 0
    h = rec.residual_history
    assert all(b < a for a, b in zip(h, h[1:]))
    assert rec.jacobian_rel_diff is not None and rec.jacobian_rel_diff < 1e-3


def test_newton_iteration_cap(problem):
    cfg = problem.cfg
    from dataclasses import replace
    tight = ShootingProblem(replace(cfg, max_newton_iters=1))
    with pytest.raises(MaxItersExceeded):
        newton_solve(0.0, 0.0, cfg.checkpoint(1), tight)


def test_trace_roundtrip(one_checkpoint, tmp_path):
    path = tmp_path / "trace.jsonl"
    one_checkpoint.write_jsonl(path)
    back = read_trace(path)
    assert [r["n"] for r in back] == [0, 1]
    assert back[1]["alpha"] == one_checkpoint.alpha_star
    assert step_sizes(back).shape == (1, 2)
    json.dumps(back)


def test_singular_and_unreachable():
    with pytest.raises(SingularJacobian):
        _check_singular(np.array([[1.0, 2.0], [2.0, 4.0]]))
    p = ShootingProblem(ShootConfig(slope_cap=20.0, **SMALL))
    with pytest.raises(TargetBeyondBlowup):
        p.residual(0.0, 0.0, p.cfg.checkpoint(1))


def test_finite_difference_mode(problem):
    s1 = problem.cfg.checkpoint(1)
    J = jacobian(0.0, 0.0, s1, problem, mode="finite_difference")
    assert J.shape == (2, 2) and np.linalg.det(J) > 0
