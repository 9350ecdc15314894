"""Figures written next to traces and reports (PNG, non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

MODE_COLORS = {"stable": "#4c9a2a", "ambiguous": "#e0a100", "recovery": "#c0392b"}
MODE_LEVEL = {"stable": 0, "ambiguous": 1, "recovery": 2}


def plot_run(trace: list[dict], path, title: str | None = None, truth=None) -> Path:
    """Timeline of one sequence: mode, reliability cues, pool and memory state."""
    path = Path(path)
    t = [e["t"] for e in trace]
    fig, axes = plt.subplots(3, 1, figsize=(10, 7), sharex=True, gridspec_kw={"height_ratios": [1, 2, 1.4]})

    ax = axes[0]
    ax.scatter(t, [MODE_LEVEL[e["mode"]] for e in trace], c=[MODE_COLORS[e["mode"]] for e in trace], s=10)
    commits = [e["t"] for e in trace if e["commit"] and e["commit"].get("kind") == "reconfirm"]
    for c in commits:
        ax.axvline(c, color="0.4", lw=0.8, ls=":")
    if truth is not None:
        for i, gt in enumerate(truth):
            if not gt.visible:
                ax.axvspan(i - 0.5, i + 0.5, color="0.85", lw=0, zorder=0)
    ax.set_yticks([0, 1, 2], ["stable", "ambiguous", "recovery"])
    ax.set_ylim(-0.5, 2.5)

    ax = axes[1]
    for key, label in [("q", "top IoU"), ("s_app", "appearance"), ("s_mot", "motion"), ("s_geo", "geometry")]:
        ax.plot(t, [e["scores"][key] for e in trace], lw=1, label=label)
    ax.set_ylim(-0.05, 1.05)
    ax.set_ylabel("score")
    ax.legend(loc="lower left", fontsize=8, ncol=4, frameon=False)

    ax = axes[2]
    ax.step(t, [len(e["branches"]) for e in trace], where="mid", label="branches")
    ax.step(t, [e["miss_streak"] for e in trace], where="mid", label="miss streak")
    ax.step(t, [e["gamma"] for e in trace], where="mid", label="bypass")
    drm = [e["t"] for e in trace if e["memory"]["drm_promoted"]]
    ax.plot(drm, [0] * len(drm), "k^", ms=5, label="DRM insert")
    ax.set_xlabel("frame")
    ax.legend(loc="upper left", fontsize=8, ncol=4, frameon=False)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_batch(report: dict, path) -> Path:
    """Per-kind accuracy and recovery totals from a batch report."""
    path = Path(path)
    kinds = list(report["by_kind"])
    acc = [report["by_kind"][k]["identity_accuracy"] for k in kinds]
    ftr = [report["by_kind"][k]["frames_to_recover_total"] / report["by_kind"][k]["sequences"] for k in kinds]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    a1.bar(kinds, acc, color="#4c72b0")
    a1.set_ylim(0, 1.05)
    a1.set_title("identity accuracy")
    a2.bar(kinds, ftr, color="#dd8452")
    a2.set_title("frames to recover / sequence")
    for ax in (a1, a2):
        ax.tick_params(axis="x", labelrotation=20)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
