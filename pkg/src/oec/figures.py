"""Figure rendering for run and sweep artifacts.

Uses the non-interactive Agg backend and writes PNG files next to the
delimited outputs; nothing here ever opens a window.  The CSV/JSON files
remain the primary artifacts, figures are a convenience view of them.
"""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

import numpy as np

from .metrics import MartingaleTrace, RunMetrics, replay_loads
from .partial import LevelTranscript


def fig_residual_decay(summary: RunMetrics, path) -> Path:
    """Per-level provisioned degree bound vs observed residual max degree."""
    path = Path(path)
    levels = summary.per_level
    idx = np.arange(len(levels))
    fig, ax = plt.subplots(figsize=(6, 4))
    if levels:
        ax.plot(idx, [lv["delta_i"] for lv in levels], "o-", label="provisioned bound")
        ax.plot(
            idx,
            [lv["residual_max_degree"] for lv in levels],
            "s--",
            label="residual max degree",
        )
    ax.set_xlabel("level")
    ax.set_ylabel("degree")
    ax.set_title(f"{summary.algo}: degree decay across levels")
    ax.set_xticks(idx)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def fig_load_profile(transcript: LevelTranscript, path) -> Path:
    """Mean and max per-color load per arrival, with the good threshold."""
    path = Path(path)
    ts, means, maxes = [], [], []
    for t, loads in replay_loads(transcript):
        ts.append(t)
        means.append(float(loads.mean()) if loads.size else 0.0)
        maxes.append(float(loads.max()) if loads.size else 0.0)
    eps = transcript.cfg.epsilon
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, means, label="mean load")
    ax.plot(ts, maxes, label="max load", alpha=0.7)
    ax.axhline(1.0 + eps, color="red", linestyle=":", label=f"1 + eps = {1 + eps:.3g}")
    ax.set_xlabel("arrival")
    ax.set_ylabel("color load")
    ax.set_title("snapshot color loads per arrival")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def fig_trace(trace: MartingaleTrace, path) -> Path:
    """One pair's Z series against its start value."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(len(trace.z)), trace.z, lw=0.8)
    ax.axhline(trace.z[0], color="gray", linestyle=":", label=f"Z0 = {trace.z[0]:.3g}")
    ax.set_xlabel("pick index")
    ax.set_ylabel("Z")
    ax.set_title(f"pair mass trace (|U|={len(trace.U)}, |C|={len(trace.C)})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def fig_ratio_vs_delta(rows: list[dict], path) -> Path:
    """Sweep aggregate: mean competitive ratio per degree bound."""
    path = Path(path)
    deltas = [row["delta"] for row in rows]
    means = [row["ratio_mean"] for row in rows]
    stds = [row["ratio_std"] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(deltas, means, yerr=stds, fmt="o-", capsize=3, label="mean ratio")
    ax.axhline(
        math.e / (math.e - 1),
        color="green",
        linestyle=":",
        label="e/(e-1)",
    )
    ax.set_xlabel("degree bound")
    ax.set_ylabel("colors / degree bound")
    ax.set_title("competitive ratio vs degree bound")
    ax.set_xscale("log", base=2)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_run_figures(
    summary: RunMetrics,
    transcript: LevelTranscript | None,
    traces: list[MartingaleTrace],
    out_dir,
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if summary.per_level:
        written.append(fig_residual_decay(summary, out_dir / "residual_decay.png"))
    if transcript is not None:
        written.append(fig_load_profile(transcript, out_dir / "load_profile.png"))
    for j, trace in enumerate(traces):
        written.append(fig_trace(trace, out_dir / f"trace{j}.png"))
    return written


def render_sweep_figures(rows: list[dict], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not rows:
        return []
    return [fig_ratio_vs_delta(rows, out_dir / "ratio_vs_delta.png")]
