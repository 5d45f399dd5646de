"""Figure rendering for sweep and Pareto reports.

The numerical core stays plot-free; only the CLI report path imports
this module.  Every function writes a PNG next to the delimited output
and returns the path it wrote.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .pareto import ParetoFront


def plot_sweeps(curves: list, out_path: str, title: str = "Threshold sweep") -> str:
    """Accuracy versus mean spike count, one line per model, annotated
    with the threshold at each end of the curve."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for curve in curves:
        spikes = curve.spikes()
        acc = 100.0 * curve.accuracies()
        ax.plot(spikes, acc, marker="o", ms=4, label=curve.model_id)
        ax.annotate(
            f"$\\theta$={curve.points[0].theta:g}",
            (spikes[0], acc[0]),
            fontsize=7,
            xytext=(4, 4),
            textcoords="offset points",
        )
        ax.annotate(
            f"$\\theta$={curve.points[-1].theta:g}",
            (spikes[-1], acc[-1]),
            fontsize=7,
            xytext=(4, -8),
            textcoords="offset points",
        )
    ax.set_xlabel("mean spikes per sample")
    ax.set_ylabel("accuracy (%)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_front(curves: list, front: ParetoFront, out_path: str) -> str:
    """All operating points in light grey with the Pareto front overlaid."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for curve in curves:
        ax.plot(
            curve.spikes(),
            100.0 * curve.accuracies(),
            marker="o",
            ms=3,
            lw=0.8,
            color="0.75",
            zorder=1,
        )
    xs = [e.mean_spikes for e in front.entries]
    ys = [100.0 * e.accuracy for e in front.entries]
    ax.plot(xs, ys, marker="D", ms=5, lw=1.6, color="tab:red", zorder=2, label="Pareto front")
    for e in front.entries:
        ax.annotate(
            f"{e.model_id}@{e.theta:g}",
            (e.mean_spikes, 100.0 * e.accuracy),
            fontsize=6,
            xytext=(4, 4),
            textcoords="offset points",
        )
    ax.set_xlabel("mean spikes per sample")
    ax.set_ylabel("accuracy (%)")
    ax.set_title("Accuracy / spike-count Pareto front")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_history(records: list, out_path: str) -> str:
    """Training loss and learning rate against the optimizer step."""
    steps = range(len(records))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(steps, [r.loss for r in records], lw=1.0, color="tab:blue", label="loss")
    ax.set_xlabel("optimizer step")
    ax.set_ylabel("loss")
    ax2 = ax.twinx()
    ax2.plot(steps, [r.lr for r in records], lw=1.0, color="tab:orange", label="lr")
    ax2.set_ylabel("learning rate")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
