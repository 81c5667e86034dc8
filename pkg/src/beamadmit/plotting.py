"""Figure rendering for the report path: PNGs written next to the CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METRIC_LABELS = {
    "admission_ratio": "user admission ratio",
    "switching_frequency": "switching frequency (per slice)",
    "total_cost": "total cost",
}


def _algo_label(algorithm, samples):
    if algorithm == "online" and samples != "":
        return f"online (J={samples})"
    return algorithm.replace("_", " ")


def save_status_grids(grids, titles, path):
    """Fig.-3-style panels: black cell = admissible user-slice."""
    n = len(grids)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 4.2), squeeze=False)
    for ax, grid, title in zip(axes[0], grids, titles):
        ax.imshow(1 - np.asarray(grid), cmap="gray", vmin=0, vmax=1,
                  aspect="auto", interpolation="nearest")
        ax.set_title(title, fontsize=10)
        ax.set_xlabel("user")
        ax.set_ylabel("time slice")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figures(aggregates, parameter, out_dir):
    """One PNG per metric: mean +- stderr versus the swept parameter."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    curves = sorted({(r["algorithm"], r["samples"]) for r in aggregates},
                    key=lambda k: (k[0], str(k[1])))
    for metric, label in _METRIC_LABELS.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        for algo, samples in curves:
            means = [r for r in aggregates if r["algorithm"] == algo
                     and r["samples"] == samples and r["trial"] == "mean"]
            errs = [r for r in aggregates if r["algorithm"] == algo
                    and r["samples"] == samples and r["trial"] == "stderr"]
            xs = [float(r["value"]) for r in means]
            ys = [float(r[metric]) for r in means]
            es = [float(r[metric]) for r in errs]
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3,
                        label=_algo_label(algo, samples))
        ax.set_xlabel(parameter)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.4)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"sweep_{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def save_bench_figure(rows, path):
    """Normalized per-iteration/solve times for the three bench curves."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    j_rows = [r for r in rows if r["curve"] == "j_scaling"]
    axes[0].plot([r["J"] for r in j_rows], [r["admm_iter_s"] for r in j_rows], "o-",
                 label="serial")
    axes[0].plot([r["J"] for r in j_rows], [r["admm_parallel_iter_s"] for r in j_rows],
                 "s--", label="simulated parallel")
    axes[0].set_xlabel("J")
    axes[0].set_ylabel("seconds / iteration")
    axes[0].set_title("scaling in sample count")
    m_rows = [r for r in rows if r["curve"] == "m_scaling"]
    axes[1].plot([r["M"] for r in m_rows], [r["admm_iter_s"] for r in m_rows], "o-")
    axes[1].set_xlabel("M")
    axes[1].set_ylabel("seconds / iteration")
    axes[1].set_title("scaling in user count (N=32)")
    c_rows = [r for r in rows if r["curve"] == "oracle_contrast"]
    axes[2].semilogy([r["M"] for r in c_rows], [r["admm_iter_s"] for r in c_rows],
                     "o-", label="ADMM iteration")
    axes[2].semilogy([r["M"] for r in c_rows], [r["oracle_solve_s"] for r in c_rows],
                     "s--", label="first-order oracle solve")
    axes[2].set_xlabel("M")
    axes[2].set_ylabel("seconds (log)")
    axes[2].set_title("engine vs reference oracle")
    for ax in axes:
        ax.grid(True, alpha=0.4)
    axes[0].legend(fontsize=8)
    axes[2].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
