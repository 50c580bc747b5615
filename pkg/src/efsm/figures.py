"""Figure rendering for the CLI report paths.

Kept separate from the evaluation module on purpose: evaluation emits data
artifacts only, and everything drawn here is re-derivable from those
artifacts.  All figures render through the Agg backend straight to files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EvalReport
from .simulate import RunLog

__all__ = ["render_run_figure", "render_report_figures"]

_SAVE = {"dpi": 110, "metadata": {}}


def render_run_figure(log: RunLog, path) -> Path:
    """Four stacked panels over time: headway, speeds, follower control,
    recognized state index."""
    t = np.array([rec.time for rec in log.records])
    if t.size == 0:
        fig, ax = plt.subplots(figsize=(8, 2))
        ax.set_axis_off()
        ax.text(0.5, 0.5, "empty run", ha="center", va="center")
        fig.savefig(path, **_SAVE)
        plt.close(fig)
        return Path(path)
    headway = np.array([rec.headway for rec in log.records])
    v_f = np.array([rec.v_f for rec in log.records])
    v_p = np.array([rec.v_p for rec in log.records])
    u_f = np.array(
        [rec.u_f if rec.u_f is not None else np.nan for rec in log.records]
    )
    state = np.array([rec.state for rec in log.records])

    fig, axes = plt.subplots(4, 1, figsize=(8, 9), sharex=True)
    axes[0].plot(t, headway, color="tab:blue")
    axes[0].set_ylabel("headway [m]")
    axes[1].plot(t, v_f, label="follower", color="tab:orange")
    axes[1].plot(t, v_p, label="preceding", color="tab:green")
    axes[1].set_ylabel("speed [m/s]")
    axes[1].legend(loc="best", fontsize=8)
    axes[2].plot(t, u_f, color="tab:red")
    axes[2].set_ylabel("u_f [m/s$^2$]")
    axes[3].step(t, state, where="post", color="tab:purple")
    axes[3].set_ylabel("state")
    axes[3].set_xlabel("time [s]")
    axes[3].yaxis.get_major_locator().set_params(integer=True)
    title = f"case {log.case_id}: {log.terminal}"
    if log.collision_step is not None:
        title += f" at t={log.records[-1].time:.2f} s"
    axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return Path(path)


def render_report_figures(report: EvalReport, out_dir) -> list[Path]:
    """jsd.png (final run per case) and states.png (count per run)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    case_ids = sorted({run.case_id for run in report.runs})
    rows = max(1, (len(case_ids) + 1) // 2)
    fig, axes = plt.subplots(rows, 2, figsize=(10, 3 * rows), squeeze=False)
    for ax in axes.flat:
        ax.set_visible(False)
    for ax, case_id in zip(axes.flat, case_ids):
        ax.set_visible(True)
        run = report.final_run_for_case(case_id)
        ax.plot(run.jsd_series, linewidth=0.7, color="tab:blue")
        ax.axhline(0.15, color="tab:red", linewidth=0.8, linestyle="--")
        ax.set_ylim(0.0, max(0.5, float(run.jsd_series.max()) * 1.1) if run.steps else 0.5)
        ax.set_title(f"case {case_id} (run {run.run_index}): {run.terminal}", fontsize=9)
        ax.set_xlabel("tick")
        ax.set_ylabel("JSD")
    fig.suptitle("one-step prediction error, final run per case", fontsize=11)
    fig.tight_layout()
    jsd_path = out / "jsd.png"
    fig.savefig(jsd_path, **_SAVE)
    plt.close(fig)
    paths.append(jsd_path)

    fig, ax = plt.subplots(figsize=(8, 3.5))
    idx = [i for i, _ in report.state_count_trajectory]
    counts = [n for _, n in report.state_count_trajectory]
    ax.step(idx, counts, where="post", color="tab:purple")
    ax.set_xlabel("run")
    ax.set_ylabel("states")
    ax.set_title("state count after each run", fontsize=11)
    ax.yaxis.get_major_locator().set_params(integer=True)
    fig.tight_layout()
    states_path = out / "states.png"
    fig.savefig(states_path, **_SAVE)
    plt.close(fig)
    paths.append(states_path)
    return paths
