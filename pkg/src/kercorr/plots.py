"""Figure rendering for the experiment reports.

Each function takes the tabular result an experiment already wrote as CSV
and saves a PNG next to it.  Plots are a presentation layer only: nothing
downstream reads them back.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def convergence_figure(table, slopes, path):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for kernel, sub in table.groupby("kernel"):
        ok = sub[(~sub["degenerate"]) & (sub["corr"] > 0)]
        if ok.empty:
            continue
        nn = ok["n1"] * ok["n2"]
        label = kernel
        slope = slopes.get(kernel)
        if slope is not None and np.isfinite(slope):
            label = f"{kernel} (slope {slope:.2f})"
        order = np.argsort(nn.values)
        ax.loglog(nn.values[order], ok["corr"].values[order], "o-", label=label)
    ax.set_xlabel(r"$n_1 n_2$")
    ax.set_ylabel("posterior correlation")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def stability_figure(table, path):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for kernel, sub in table.groupby("kernel"):
        sub = sub.sort_values("n")
        # shift n=0 onto a log axis
        n = np.maximum(sub["n"].values, 0.5)
        ax.loglog(n, sub["corr"].values, "o-", label=kernel, alpha=0.8)
    ax.set_xlabel("observations per group (0 shown at 0.5)")
    ax.set_ylabel("posterior correlation")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def estimator_comparison_figure(raw, path):
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    data = [raw[c].dropna().values for c in raw.columns]
    ax.boxplot(data, tick_labels=list(raw.columns))
    ax.set_ylabel("estimated posterior correlation")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def compare_figure(matrices, path):
    fig, axes = plt.subplots(1, len(matrices), figsize=(4.2 * len(matrices), 3.8))
    if len(matrices) == 1:
        axes = [axes]
    vmax = max(m.values.max() for m in matrices.values()) or 1.0
    for ax, (name, mat) in zip(axes, matrices.items()):
        im = ax.imshow(mat.values, vmin=0.0, vmax=vmax, cmap="viridis")
        ax.set_xticks(range(len(mat.columns)), [f"{x:g}" for x in mat.columns])
        ax.set_yticks(range(len(mat.index)), [f"{x:g}" for x in mat.index])
        ax.set_title(name.replace("_", " "), fontsize=9)
        for a in range(mat.shape[0]):
            for b in range(mat.shape[1]):
                ax.text(b, a, f"{mat.values[a, b]:.2f}", ha="center", va="center",
                        color="white", fontsize=7)
    fig.colorbar(im, ax=axes, shrink=0.8)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def clt_figure(report, path):
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    m = np.asarray(report.m_grid, dtype=float)
    ax.loglog(m, report.variances, "o", label="empirical variance")
    if report.slope is not None:
        fit = np.exp(report.intercept) * m**report.slope
        ax.loglog(m, fit, "--", label=f"fit, slope {report.slope:.2f}")
    ax.set_xlabel("number of blocks")
    ax.set_ylabel("variance of the estimate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
