"""Figure rendering for the report paths of the CLI.

All functions write a PNG next to the delimited output and return the path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from parityanneal.harness import CLASSES, TOY_STATES

CLASS_COLORS = {
    "red": "tab:red",
    "gray": "0.6",
    "green": "tab:green",
    "other": "tab:blue",
}


def toy_figure(report, path):
    """Empirical vs exact stationary distributions of the benchmark."""
    labels = ["".join("+" if v > 0 else "-" for v in s) for s in TOY_STATES]
    d = report.distributions
    panels = [
        ("standard vs Boltzmann", "standard", "exact_boltzmann"),
        ("rejection-discarded vs jump chain", "rejection_discarded", "exact_jumpchain"),
        ("rejection-free vs jump chain", "rejection_free", "exact_jumpchain"),
        ("reweighted vs Boltzmann", "recovered", "exact_boltzmann"),
    ]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    x = np.arange(len(labels))
    for ax, (title, emp_key, exact_key) in zip(axes.ravel(), panels):
        ax.bar(x - 0.2, d[emp_key], width=0.4, label="empirical")
        ax.bar(x + 0.2, d[exact_key], width=0.4, label="exact")
        ax.set_title(title, fontsize=9)
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=45, fontsize=7)
    axes[0, 0].legend(fontsize=8)
    fig.suptitle(f"three-spin benchmark, k={report.k_param}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def sweep_figure(cells, path):
    """Success fractions over the (beta, gamma) grid, one panel per metric."""
    betas = np.array([c.beta for c in cells])
    gammas = np.array([c.gamma for c in cells])
    metrics = [
        ("p_code", [c.p_code for c in cells]),
        ("p_target_map", [c.p_target_map for c in cells]),
        ("p_target_mvd", [c.p_target_mvd for c in cells]),
    ]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6), sharey=True)
    for ax, (name, vals) in zip(axes, metrics):
        sc = ax.scatter(betas, gammas, c=vals, s=120, cmap="viridis", vmin=0, vmax=1)
        ax.set_xlabel("beta")
        ax.set_title(name, fontsize=9)
        if len(set(betas)) > 1:
            ax.set_xscale("log")
        if len(set(gammas)) > 1 and min(gammas) > 0:
            ax.set_yscale("log")
    axes[0].set_ylabel("gamma")
    fig.colorbar(sc, ax=axes, fraction=0.02)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def spectra_figure(result, path):
    """Stacked per-class histograms of the four recorded spectra."""
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    names = ["phys", "local", "pen", "logical_decoded"]
    for ax, name in zip(axes.ravel(), names):
        rows = result.spectra[name]
        lows = [r[0] for r in rows]
        widths = [r[1] - r[0] for r in rows]
        bottom = np.zeros(len(rows))
        for ci, cls in enumerate(CLASSES):
            heights = np.array([r[3 + ci] for r in rows], dtype=float)
            ax.bar(
                lows,
                heights,
                width=widths,
                bottom=bottom,
                align="edge",
                color=CLASS_COLORS[cls],
                label=cls,
            )
            bottom += heights
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("energy")
        ax.set_ylabel("count")
    axes[0, 0].legend(fontsize=8)
    fig.suptitle(f"beta={result.beta}, gamma={result.gamma}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def agreement_figure(matrix, path):
    """Per-spin agreement probability with the target code state."""
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(matrix, vmin=0, vmax=1, cmap="RdYlGn")
    ax.set_xlabel("j")
    ax.set_ylabel("i")
    ax.set_title("P(r_ij = target)", fontsize=10)
    fig.colorbar(im, ax=ax)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path
