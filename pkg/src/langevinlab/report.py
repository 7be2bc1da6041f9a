"""Matplotlib figure rendering for run reports.

Figures are written to files next to the delimited output; matplotlib is
imported lazily and forced onto the Agg backend so the report path works
headless.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "render_trace_figure",
    "render_density_figure",
    "render_comparison_figure",
]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_trace_figure(rows, f_star: float, path, title: str = "") -> None:
    """Objective gap and squared norm against the step counter."""
    plt = _pyplot()
    ks = [row[0] for row in rows]
    gaps = [max(row[1] - f_star, 0.0) for row in rows]
    sq = [row[2] for row in rows]
    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    axes[0].plot(ks, gaps, lw=0.8)
    axes[0].set_yscale("symlog", linthresh=1e-12)
    axes[0].set_ylabel("F(x_k) - F*")
    if title:
        axes[0].set_title(title)
    axes[1].plot(ks, sq, lw=0.8, color="tab:orange")
    axes[1].set_ylabel("||x_k||^2")
    axes[1].set_xlabel("step k")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_density_figure(table, empirical, path) -> None:
    """Quadrature density against the empirical histogram (1-d or 2-d)."""
    plt = _pyplot()
    if table.dim == 1:
        fig, ax = plt.subplots(figsize=(7, 4))
        x = table.axes[0]
        ax.plot(x, table.density, label="quadrature", lw=1.5)
        ax.step(x, empirical.density, where="mid", label="empirical", lw=0.9)
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.legend(frameon=False)
    else:
        fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
        extent = (
            table.axes[0][0],
            table.axes[0][-1],
            table.axes[1][0],
            table.axes[1][-1],
        )
        vmax = float(max(table.density.max(), empirical.density.max()))
        for ax, dens, label in (
            (axes[0], table.density, "quadrature"),
            (axes[1], empirical.density, "empirical"),
        ):
            ax.imshow(dens.T, origin="lower", extent=extent, vmin=0.0, vmax=vmax, aspect="auto")
            ax.set_title(label)
            ax.set_xlabel("x")
        axes[0].set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_comparison_figure(rows, path) -> None:
    """Gradient evaluations spent and mean gap achieved, per config."""
    plt = _pyplot()
    names = [row["name"] for row in rows]
    evals = [
        row["grad_evals"] if isinstance(row["grad_evals"], int) else max(row["grad_evals"])
        for row in rows
    ]
    gaps = [row["mean_gap"] if row["mean_gap"] is not None else np.nan for row in rows]
    stds = [row["std_gap"] if row["std_gap"] is not None else 0.0 for row in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].bar(names, evals, color="tab:blue")
    axes[0].set_ylabel("gradient evaluations")
    axes[0].tick_params(axis="x", rotation=30)
    axes[1].bar(names, gaps, yerr=stds, color="tab:orange", capsize=4)
    axes[1].set_ylabel("mean final gap")
    axes[1].tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
