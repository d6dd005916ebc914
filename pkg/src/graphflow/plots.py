"""Matplotlib figure rendering for run and bench reports.

Figures are written next to the delimited output; the CSV/JSON files
remain the machine-readable contract.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_run_figure(record, path):
    """Loss (and order parameter, when present) over iterations."""
    rhos = [r for r in record.order_params() if r is not None]
    n_panels = 2 if rhos else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(5 * n_panels, 3.4))
    axes = np.atleast_1d(axes)
    iters = [r[0] for r in record.rows]
    axes[0].plot(iters, record.losses(), lw=1.2)
    if record.switch_iter is not None:
        axes[0].axvline(record.switch_iter, color="gray", ls="--", lw=0.8,
                        label=f"switch @ {record.switch_iter}")
        axes[0].legend(fontsize=8)
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("loss")
    if rhos:
        axes[1].plot(iters[:len(rhos)], rhos, lw=1.2, color="tab:orange")
        axes[1].set_xlabel("iteration")
        axes[1].set_ylabel("order parameter")
        axes[1].set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_comparison_figure(records, path, logy=False):
    """Overlayed loss curves; records is {label: RunRecord}."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for label, record in records.items():
        ax.plot([r[0] for r in record.rows], record.losses(), lw=1.2, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_bench_figure(results, path):
    """Per-seed iteration/wall-clock speedups with their medians."""
    seeds = [s for s, _, _, _ in results]
    iter_s = [r.iter_speedup_to_threshold for _, _, _, r in results]
    wall_s = [r.wallclock_speedup for _, _, _, r in results]
    x = np.arange(len(seeds))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.bar(x - width / 2, [v if v is not None else 0 for v in iter_s],
           width, label="iteration speedup")
    ax.bar(x + width / 2, [v if v is not None else 0 for v in wall_s],
           width, label="wall-clock speedup")
    finite_iter = [v for v in iter_s if v is not None and np.isfinite(v)]
    if finite_iter:
        ax.axhline(np.median(finite_iter), color="tab:blue", ls="--", lw=0.9)
    finite_wall = [v for v in wall_s if v is not None and np.isfinite(v)]
    if finite_wall:
        ax.axhline(np.median(finite_wall), color="tab:orange", ls="--", lw=0.9)
    ax.axhline(1.0, color="gray", lw=0.8)
    ax.set_xticks(x, [str(s) for s in seeds])
    ax.set_xlabel("seed")
    ax.set_ylabel("speedup")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_cloud_figure(before, after, range_r, path):
    """Initial and optimized point clouds side by side."""
    fig, axes = plt.subplots(1, 2, figsize=(7.2, 3.6), sharex=True, sharey=True)
    for ax, pts, title in ((axes[0], before, "initial"), (axes[1], after, "optimized")):
        ax.scatter(pts[:, 0], pts[:, 1], s=8)
        box = plt.Rectangle((-range_r, -range_r), 2 * range_r, 2 * range_r,
                            fill=False, color="gray", lw=0.8)
        ax.add_patch(box)
        ax.set_title(title, fontsize=9)
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
