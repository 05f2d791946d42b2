"""Matplotlib figures written next to the CSV reports."""
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path):
    # fixed metadata keeps reruns byte-stable
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_learning_curves(curves, aggregate_rows, path, title=None):
    """Success rate and return per checkpoint: seeds faint, mean +- s.e. bold."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3))
        for col, ax, label in ((3, axes[0], "success rate"), (1, axes[1], "mean return")):
            for curve in curves:
                attr = "success_rate" if col == 3 else "mean_return"
                ax.plot([p.step for p in curve], [getattr(p, attr) for p in curve],
                        color="0.7", lw=0.8)
            steps = np.array([r[0] for r in aggregate_rows], dtype=float)
            mean = np.array([r[col] for r in aggregate_rows], dtype=float)
            se = np.nan_to_num(np.array([r[col + 1] for r in aggregate_rows], dtype=float))
            ax.plot(steps, mean, color="C0", lw=1.8)
            ax.fill_between(steps, mean - se, mean + se, color="C0", alpha=0.25, lw=0)
            ax.set_xlabel("training steps")
            ax.set_ylabel(label)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        _save(fig, path)


def plot_value_map(rows, path, title=None, grid=12, bins=20):
    """Arrow per occupied (cell, heading bin); arrow length scales with stored value."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 5))
        if rows:
            vals = np.array([r[3] for r in rows])
            vmax = max(float(np.abs(vals).max()), 1e-12)
            x = np.array([r[0] + 0.5 for r in rows])
            y = np.array([r[1] + 0.5 for r in rows])
            ang = (np.array([r[2] for r in rows]) + 0.5) * (2 * math.pi / bins)
            length = 0.45 * np.abs(vals) / vmax
            ax.quiver(x, y, length * np.cos(ang), length * np.sin(ang), vals,
                      angles="xy", scale_units="xy", scale=1, cmap="viridis", width=0.004)
        ax.set_xlim(0, grid)
        ax.set_ylim(0, grid)
        ax.set_xticks(range(grid + 1))
        ax.set_yticks(range(grid + 1))
        ax.grid(True, lw=0.3)
        ax.set_aspect("equal")
        if title:
            ax.set_title(title)
        _save(fig, path)
