"""Plot data (CSV) and rendered figures (PNG) for runs and reports."""
from __future__ import annotations

import csv
import os

import numpy as np

from .diagnostics import holder_samples
from .profile import u2_nu_eval


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def write_records_csv(traj, path):
    keys = list(traj.records)
    cols = [traj.records[k] for k in keys]
    jet_cols = [traj.jets[:, n] for n in range(traj.jets.shape[1])]
    header = keys + [f"dX{n}U0" for n in range(len(jet_cols))]
    write_csv(path, header, zip(*(cols + jet_cols)))


def write_origin_csvs(traj, outdir, prefix=""):
    s = traj.records["s"]
    write_csv(os.path.join(outdir, f"{prefix}d2U0.csv"), ["s", "abs_d2U0"],
              zip(s, np.abs(traj.jets[:, 2])))
    write_csv(os.path.join(outdir, f"{prefix}d3U0.csv"), ["s", "abs_d3U0"],
              zip(s, np.abs(traj.jets[:, 3])))


def write_frame_csv(frame, path):
    rows = zip(frame.U.x, frame.U.values, frame.dU.values)
    write_csv(path, ["X", "U", "U_X"], rows)


def write_holder_csv(u, x_star, window, path):
    rr, du = holder_samples(u, x_star, window)
    n = rr.size // 2
    side = ["right"] * n + ["left"] * n
    ok = np.abs(du) > 0
    rows = [(sd, np.log(r), np.log(abs(d))) for sd, r, d, k in zip(side, rr, du, ok) if k]
    write_csv(path, ["side", "log_r", "log_abs_du"], rows)
    return rr, du


def write_profile_error_csv(report, path):
    write_csv(path, ["s", "profile_error"], report.profile_errors)


def figure_origin(series, path, title="origin jet"):
    """``series``: list of (label, s, jets) triples; semilog |U''(0)| and |U'''(0)|."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    for label, s, jets in series:
        for ax, n in zip(axes, (2, 3)):
            ax.semilogy(s, np.abs(jets[:, n]) + 1e-300, label=label)
    for ax, n in zip(axes, (2, 3)):
        ax.set_xlabel("s")
        ax.set_ylabel(f"|d^{n}U(0,s)|")
        ax.legend()
    fig.suptitle(title)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_holder(u, x_star, window, path, exponent=None):
    plt = _pyplot()
    rr, du = holder_samples(u, x_star, window)
    n = rr.size // 2
    fig, ax = plt.subplots(figsize=(5, 4), constrained_layout=True)
    ax.loglog(rr[:n], np.abs(du[:n]), "o", label="x > x*")
    ax.loglog(rr[n:], np.abs(du[n:]), "s", label="x < x*", mfc="none")
    if exponent is not None:
        ref = np.abs(du[:n]).max() * (rr[:n] / rr[:n].max()) ** exponent
        ax.loglog(rr[:n], ref, "k--", label=f"slope {exponent:.3f}")
    ax.set_xlabel("|x - x*|")
    ax.set_ylabel("|u(x) - u(x*)|")
    ax.legend()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_profile_error(report, path):
    plt = _pyplot()
    if not report.profile_errors:
        return
    s, e = np.array(report.profile_errors).T
    fig, ax = plt.subplots(figsize=(5, 4), constrained_layout=True)
    ax.semilogy(s, e, "o-")
    ax.set_xlabel("s")
    ax.set_ylabel("sup |U - U2^nu| on |X| <= 5")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_frames(frames, nu, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    for fr in frames:
        ax.plot(fr.U.x, fr.U.values, lw=0.8, label=f"s = {fr.s:.2f}")
    X = frames[-1].U.x
    ax.plot(X, u2_nu_eval(X, nu), "k--", lw=1.2, label="U2^nu")
    ax.set_xlabel("X")
    ax.set_ylabel("U(X, s)")
    ax.legend(fontsize=7)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_gradient_rate(traj, T_star, path):
    plt = _pyplot()
    r = traj.records
    gap = T_star - r["t"]
    keep = gap > 0
    fig, ax = plt.subplots(figsize=(5, 4), constrained_layout=True)
    ax.semilogx(gap[keep], gap[keep] * r["slope"][keep], ".-")
    ax.axhline(0.5, color="k", ls=":")
    ax.axhline(2.0, color="k", ls=":")
    ax.invert_xaxis()
    ax.set_xlabel("T* - t")
    ax.set_ylabel("(T* - t) |u_x|_inf")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_run_outputs(traj, report, outdir, label="run"):
    """CSV series and figures for one analyzed run."""
    os.makedirs(outdir, exist_ok=True)
    write_records_csv(traj, os.path.join(outdir, "records.csv"))
    write_origin_csvs(traj, outdir)
    write_profile_error_csv(report, os.path.join(outdir, "profile_error.csv"))
    window = tuple(report.holder_window)
    try:
        write_holder_csv(traj.final, report.x_star, window, os.path.join(outdir, "holder.csv"))
        figure_holder(traj.final, report.x_star, window, os.path.join(outdir, "holder.png"),
                      report.holder_exponent)
    except ValueError:
        pass
    figure_origin([(label, traj.records["s"], traj.jets)], os.path.join(outdir, "origin.png"))
    figure_profile_error(report, os.path.join(outdir, "profile_error.png"))
    figure_gradient_rate(traj, report.T_star, os.path.join(outdir, "gradient_rate.png"))
    framed = [f for f in traj.frames if f.U is not None]
    if framed:
        pick = framed[:: max(1, len(framed) // 6)]
        figure_frames(pick, report.nu_estimate, os.path.join(outdir, "frames.png"))
