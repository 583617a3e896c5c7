"""Command-line entry point ``bhlab``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error,
3 degenerate modulation (frame extraction failed), 4 non-finite state.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from .errors import BHLabError, ConfigError, DegenerateModulation, NonFiniteState

log = logging.getLogger("bhlab")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_DEGENERATE, EXIT_NONFINITE = 0, 1, 2, 3, 4


def _fmt(v) -> str:
    return f"{float(v) + 0.0:.15g}"


def cmd_profile(args) -> int:
    from .profile import ui_derivatives, ui_eval
    from .plotting import write_csv

    if args.at is None and args.range is None:
        raise ConfigError("profile needs --at X or --range A B N")
    if args.at is not None:
        X = args.at
        print(f"X={_fmt(X)}")
        print(f"U={_fmt(ui_eval(X, args.i))}")
        d = ui_derivatives(X, args.i, args.max_order)
        for n, v in enumerate(d, start=1):
            name = "U" + "'" * n if n <= 3 else f"U^({n})"
            print(f"{name}={_fmt(v)}")
    if args.range is not None:
        a, b, n = float(args.range[0]), float(args.range[1]), int(args.range[2])
        X = np.linspace(a, b, n)
        U = ui_eval(X, args.i)
        D = ui_derivatives(X, args.i, args.max_order)
        header = ["X", "U"] + [f"d{k}U" for k in range(1, args.max_order + 1)]
        rows = np.column_stack([X, U, D.T])
        if args.out:
            write_csv(args.out, header, rows)
        else:
            print(",".join(header))
            for row in rows:
                print(",".join(_fmt(v) for v in row))
    return EXIT_OK


def cmd_hilbert_test(args) -> int:
    from .hilbert import cross_validate

    rows = cross_validate(n_points=args.n_points, n_probe=args.n_probe, seed=args.seed)
    ok = True
    for name, err, tol in rows:
        passed = err <= tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:40s} err={err:.3e} tol={tol:.0e}")
    return EXIT_OK if ok else EXIT_RUNTIME


def _load(args):
    overrides = cfgmod.parse_assignments(getattr(args, "set", None))
    return cfgmod.load_config(args.config, overrides)


def _trace_params(path):
    from .shooting import read_trace
    last = read_trace(path)[-1]
    return float(last["alpha"]), float(last["beta"])


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=str)
        fh.write("\n")


def cmd_simulate(args) -> int:
    from .diagnostics import analyze_run
    from .evolve import run
    from .initdata import build_initial_physical, validate_initial
    from .plotting import emit_run_outputs, write_frame_csv

    cfg = _load(args)
    if args.trace:
        cfg["init"]["alpha"], cfg["init"]["beta"] = _trace_params(args.trace)
        cfgmod.validate(cfg)
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "config.json"), cfg)
    grid = cfgmod.grid_of(cfg)
    icfg = cfgmod.init_of(cfg)
    u0 = build_initial_physical(icfg, grid)
    notes = []
    if icfg.family == 2:
        rep = validate_initial(icfg, u0)
        _write_json(os.path.join(args.out, "initial_validation.json"), rep.as_dict())
        if not rep.passed:
            msg = "initial datum fails: " + ", ".join(c.name for c in rep.failures)
            if not args.force:
                raise ConfigError(msg + " (use --force to run anyway)")
            notes.append(msg)
    ecfg = cfgmod.evolve_of(cfg)
    try:
        traj = run(u0, icfg.t0, ecfg, epsilon=icfg.epsilon)
    except NonFiniteState as exc:
        if exc.dump:
            np.savez_compressed(os.path.join(args.out, "nonfinite_dump.npz"),
                                **{k: np.asarray(v) for k, v in exc.dump.items()})
        raise
    traj.save(os.path.join(args.out, "trajectory.npz"))
    _write_json(os.path.join(args.out, "modulation.json"), [m.as_dict() for m in traj.mods])
    fdir = os.path.join(args.out, "frames")
    os.makedirs(fdir, exist_ok=True)
    for k, fr in enumerate(f for f in traj.frames if f.U is not None):
        write_frame_csv(fr, os.path.join(fdir, f"frame_{k:03d}.csv"))
    report = analyze_run(traj, cfgmod.diagnostics_of(cfg), icfg.epsilon, cfg)
    report.notes.extend(notes)
    report.to_json(os.path.join(args.out, "report.json"))
    if not args.no_figures:
        emit_run_outputs(traj, report, args.out, cfg["run"]["label"])
    _print_summary(report)
    return EXIT_OK


def _print_summary(report):
    print(f"T*={_fmt(report.T_star)} x*={_fmt(report.x_star)} stop={report.stop_reason}")
    lo, hi = report.gradient_rate_band
    print(f"gradient_rate_band=[{lo:.4f}, {hi:.4f}] nu={report.nu_estimate:.4f}")
    if report.holder_exponent is not None:
        print(f"holder_exponent={report.holder_exponent:.4f} +- {report.holder_stderr:.4f}")
    for name, fit in report.decay_fits.items():
        if fit["rate"] is not None:
            print(f"decay {name}: rate={fit['rate']:.3f} +- {fit['stderr']:.3f}")


def cmd_shoot(args) -> int:
    from .shooting import shoot_sequence

    cfg = _load(args)
    scfg = cfgmod.shoot_of(cfg)
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "config.json"), cfg)
    trace_path = os.path.join(args.out, "trace.jsonl")
    with open(trace_path, "w") as fh:
        def progress(rec):
            fh.write(json.dumps(rec.as_dict()) + "\n")
            fh.flush()
            print(f"checkpoint {rec.n}: s={rec.s_n:.4f} alpha={rec.alpha:.12g} "
                  f"beta={rec.beta:.12g} |r|=({abs(rec.r2):.2e}, {abs(rec.r3):.2e}) "
                  f"det={rec.det:.4g} iters={rec.newton_iters}", flush=True)

        from .shooting import initial_record
        progress(initial_record(scfg))
        result = shoot_sequence(scfg, progress=progress)
    _write_json(os.path.join(args.out, "result.json"),
                {"alpha_star": result.alpha_star, "beta_star": result.beta_star,
                 "config": cfg})
    print(f"alpha*={result.alpha_star!r} beta*={result.beta_star!r}")
    return EXIT_OK


def _run_dir_config(args):
    if args.config is not None:
        return _load(args)
    saved = os.path.join(args.run, "config.json")
    if os.path.exists(saved):
        with open(saved) as fh:
            raw = json.load(fh)
        overrides = cfgmod.parse_assignments(getattr(args, "set", None))
        cfg = cfgmod.merge(cfgmod.defaults(), raw, saved)
        return cfgmod.merge(cfg, overrides, "command line")
    return _load(args)


def cmd_diagnose(args) -> int:
    from .diagnostics import analyze_run
    from .evolve import Trajectory

    cfg = _run_dir_config(args)
    traj = Trajectory.load(os.path.join(args.run, "trajectory.npz"))
    report = analyze_run(traj, cfgmod.diagnostics_of(cfg), cfg["init"]["epsilon"], cfg)
    report.to_json(os.path.join(args.run, "report.json"))
    _print_summary(report)
    return EXIT_OK


def cmd_report(args) -> int:
    from .diagnostics import analyze_run, shot_separation
    from .evolve import Trajectory
    from .plotting import emit_run_outputs, figure_origin

    cfg = _run_dir_config(args)
    traj = Trajectory.load(os.path.join(args.run, "trajectory.npz"))
    report = analyze_run(traj, cfgmod.diagnostics_of(cfg), cfg["init"]["epsilon"], cfg)
    out = args.out or args.run
    emit_run_outputs(traj, report, out, cfg["run"]["label"])
    report.to_json(os.path.join(out, "report.json"))
    if args.compare:
        other = Trajectory.load(os.path.join(args.compare, "trajectory.npz"))
        figure_origin([("this run", traj.records["s"], traj.jets),
                       ("comparison", other.records["s"], other.jets)],
                      os.path.join(out, "origin_compare.png"))
        lo = args.window[0] if args.window else traj.records["s"][0]
        hi = args.window[1] if args.window else report.resolved_window[1]
        sep = shot_separation(traj, other, lo, hi)
        _write_json(os.path.join(out, "comparison.json"), {"window": [lo, hi], **sep})
        print(f"separation={sep['ratio']:.3g} over s in [{lo:.3f}, {hi:.3f}]")
    _print_summary(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bhlab", description="Burgers-Hilbert blowup laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("profile", help="evaluate the self-similar profile U_i")
    q.add_argument("--i", type=int, required=True, choices=range(1, 5), metavar="I")
    q.add_argument("--at", type=float)
    q.add_argument("--range", nargs=3, metavar=("A", "B", "N"))
    q.add_argument("--max-order", type=int, default=5)
    q.add_argument("--out")
    q.set_defaults(func=cmd_profile)

    q = sub.add_parser("hilbert-test", help="cross-validate the Hilbert transforms")
    q.add_argument("--n-points", type=int, default=4096)
    q.add_argument("--n-probe", type=int, default=32)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_hilbert_test)

    for name, func, text in (("simulate", cmd_simulate, "integrate one datum to the slope limit"),
                             ("shoot", cmd_shoot, "Newton shooting on the unstable directions")):
        q = sub.add_parser(name, help=text)
        q.add_argument("--config")
        q.add_argument("--out", required=True)
        q.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
        if name == "simulate":
            q.add_argument("--trace", help="take (alpha, beta) from a shoot trace")
            q.add_argument("--force", action="store_true")
            q.add_argument("--no-figures", action="store_true")
        q.set_defaults(func=func)

    for name, func, text in (("diagnose", cmd_diagnose, "re-analyze a saved run"),
                             ("report", cmd_report, "CSV series and figures for a saved run")):
        q = sub.add_parser(name, help=text)
        q.add_argument("--run", required=True)
        q.add_argument("--config")
        q.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
        if name == "report":
            q.add_argument("--out")
            q.add_argument("--compare", help="second run directory (e.g. unshot)")
            q.add_argument("--window", nargs=2, type=float, metavar=("S_LO", "S_HI"))
        q.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"bhlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateModulation as exc:
        print(f"bhlab: degenerate modulation: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NonFiniteState as exc:
        print(f"bhlab: non-finite state: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (BHLabError, OSError) as exc:
        print(f"bhlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
