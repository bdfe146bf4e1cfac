"""Report figures rendered from run artifacts.

Everything here draws from the delimited outputs (trace CSV, sweep CSV),
never from live simulator state, so a report can be regenerated from the
files alone.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import TRACE_COLUMNS, read_trace

PHASE_COLORS = {"startup": "#dfe8f3", "steering": "#fdeccd",
                "terminal": "#e4f2e0"}


def _parse_trace(path):
    rows = read_trace(path)
    cols = {name: [] for name in TRACE_COLUMNS}
    for line in rows:
        parts = line.split(",")
        for name, val in zip(TRACE_COLUMNS, parts):
            cols[name].append(val)
    out = {}
    for name in TRACE_COLUMNS:
        if name in ("phase", "event"):
            out[name] = cols[name]
        else:
            out[name] = np.array([float(v) for v in cols[name]])
    return out


def _phase_bands(ax, t, phases):
    start = 0
    for i in range(1, len(phases) + 1):
        if i == len(phases) or phases[i] != phases[start]:
            color = PHASE_COLORS.get(phases[start])
            if color:
                hi = t[i] if i < len(t) else t[-1]
                ax.axvspan(t[start], hi, color=color, zorder=0)
            start = i


def plot_trace(trace_path, out_path):
    """Three-panel run report: workspace path, joint history, actuation."""
    d = _parse_trace(trace_path)
    t = d["t"]
    fig, axes = plt.subplots(3, 1, figsize=(8.2, 9.4))

    ax = axes[0]
    ax.plot(d["xe"], d["ye"], "-", lw=1.2, color="tab:blue", label="end effector")
    ax.plot(d["obs_x"][d["obs_t"] >= 0.0], d["obs_y"][d["obs_t"] >= 0.0],
            ".", ms=3, color="tab:red", label="observed target")
    ax.plot(d["xe"][0], d["ye"][0], "o", color="tab:blue", ms=5)
    ax.plot(d["xe"][-1], d["ye"][-1], "x", color="k", ms=8,
            label=f"end ({d['event'][-1] or d['phase'][-1]})")
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("workspace path")
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")

    ax = axes[1]
    _phase_bands(ax, t, d["phase"])
    ax.plot(t, d["q1"], label="q1")
    ax.plot(t, d["q2"], label="q2")
    ax.plot(t, d["q3"], label="q3")
    ax.set_ylabel("joints [rad, m]")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("joint history (bands: startup / steering / terminal)")

    ax = axes[2]
    _phase_bands(ax, t, d["phase"])
    ax.plot(t, d["tau1"], label="tau1 [Nm]")
    ax.plot(t, d["f3"], label="f3 [N]")
    ax.step(t, d["u_cmd"], where="post", label="u cmd [N]", color="tab:red")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("actuation")
    ax.legend(loc="best", fontsize=8)

    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def plot_sweep(rows, out_path):
    """Throw-angle landscape: final time against release angle."""
    alphas = np.array([r.alpha0 for r in rows])
    tfs = np.array([r.t_f for r in rows])
    ok = np.array([r.status == "ok" for r in rows])

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.plot(alphas[ok], tfs[ok], "o-", ms=4, color="tab:blue",
            label="converged")
    if (~ok).any():
        ax.plot(alphas[~ok], tfs[~ok], "x", ms=6, color="tab:red",
                label="failed")
    if ok.any():
        i = int(np.argmin(np.where(ok, tfs, np.inf)))
        ax.plot(alphas[i], tfs[i], "*", ms=14, color="tab:green",
                label=f"best: {alphas[i]:.3f} rad, {tfs[i]:.3f} s")
    ax.set_xlabel("release angle alpha0 [rad]")
    ax.set_ylabel("minimum catch time t_f [s]")
    ax.legend(loc="best", fontsize=9)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def plot_calibration(pixel_pts, world_pts, H, out_path):
    """Reprojection residuals of a fitted homography, in world units."""
    from .vision import apply_homography

    mapped = apply_homography(H, pixel_pts)
    res = mapped - world_pts

    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax = axes[0]
    ax.plot(world_pts[:, 0], world_pts[:, 1], "o", ms=6, mfc="none",
            color="tab:blue", label="surveyed")
    ax.plot(mapped[:, 0], mapped[:, 1], "+", ms=8, color="tab:red",
            label="mapped pixels")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(fontsize=8)
    ax.set_title("world frame")
    ax.set_aspect("equal", adjustable="datalim")

    ax = axes[1]
    ax.quiver(world_pts[:, 0], world_pts[:, 1], res[:, 0], res[:, 1],
              angles="xy")
    rms = float(np.sqrt(np.mean(np.sum(res ** 2, axis=1))))
    ax.set_title(f"residuals (rms {rms * 1e3:.2f} mm)")
    ax.set_xlabel("x [m]")
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
