"""Figure rendering for the CLI report path.

All figures are written straight to files (Agg backend); the delimited
outputs remain the primary data products and figures never feed back into
the numbers.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _density_curve(values, points=200):
    values = np.asarray(values, dtype=np.float64)
    sd = values.std(ddof=1)
    if not sd > 0:
        x = np.array([values[0] - 1, values[0], values[0] + 1])
        return x, np.array([0.0, 1.0, 0.0])
    h = 0.9 * sd * values.size ** (-0.2)
    x = np.linspace(values.min() - 3 * h, values.max() + 3 * h, points)
    y = np.exp(-0.5 * ((x[:, None] - values[None, :]) / h) ** 2).sum(axis=1)
    return x, y / (values.size * h * np.sqrt(2 * np.pi))


def save_lac_density_figure(cells, path):
    """Grid of coefficient densities: columns by rho, rows by variant.

    Scenarios are color-coded and sample sizes line-styled, mirroring the
    layout of the simulation summary table.
    """
    variants = sorted({c.variant for c in cells})
    rhos = sorted({c.rho for c in cells if c.scenario != "independent"}) or [0.0]
    colors = {"dynamic": "tab:blue", "correlated": "tab:red", "independent": "tab:gray"}
    ns = sorted({c.n for c in cells})
    styles = {n: style for n, style in zip(ns, ("-", "--", ":", "-."))}

    fig, axes = plt.subplots(
        len(variants), len(rhos), figsize=(3.2 * len(rhos), 2.6 * len(variants)),
        squeeze=False, sharex="row",
    )
    for r, variant in enumerate(variants):
        for c, rho in enumerate(rhos):
            ax = axes[r][c]
            for cell in cells:
                if cell.variant != variant:
                    continue
                if cell.scenario != "independent" and cell.rho != rho:
                    continue
                x, y = _density_curve(cell.values)
                ax.plot(x, y, color=colors.get(cell.scenario, "k"),
                        linestyle=styles.get(cell.n, "-"), linewidth=1.1,
                        label=f"{cell.scenario} n={cell.n}")
            ax.axvline(0.0, color="k", linewidth=0.6, alpha=0.4)
            ax.set_title(f"{variant}, rho={rho:g}", fontsize=9)
            if r == len(variants) - 1:
                ax.set_xlabel("coefficient")
    axes[0][0].legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_scree_figure(eigenvalues, path):
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.plot(np.arange(1, eigenvalues.size + 1), eigenvalues, "o-", markersize=4)
    ax.set_xlabel("component")
    ax.set_ylabel("captured z'B'Bz")
    ax.set_title("scree")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_component_figure(components, sample_ids, path):
    fig, ax = plt.subplots(figsize=(max(4.5, len(sample_ids) / 12), 3))
    for comp in components:
        ax.plot(comp.scores, linewidth=1.0, label=f"dc{comp.rank}")
    ax.set_xlabel("sample index")
    ax.set_ylabel("score")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_null_fit_figure(scores, model, path):
    scores = np.asarray(scores, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.hist(scores, bins=80, density=True, color="lightgray", label="scores")
    ax.plot(model.grid, model.density, "b-", linewidth=1.2, label="marginal f")
    ax.plot(model.grid, model.pi0 * model.null_density(model.grid), "r--",
            linewidth=1.2, label="pi0 f0")
    ax.set_xlabel("la score")
    ax.set_ylabel("density")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_network_figure(edges, degrees, path, min_degree=0):
    """Spring-layout drawing of the qualifying process-pair network."""
    import networkx as nx

    g = nx.Graph()
    for r in edges:
        a, b = r.subject
        if degrees.get(a, 0) >= min_degree and degrees.get(b, 0) >= min_degree:
            g.add_edge(a, b, weight=r.fold_change)
    fig, ax = plt.subplots(figsize=(5, 5))
    if g.number_of_nodes():
        pos = nx.spring_layout(g, seed=0)
        sizes = [60 + 40 * g.degree(v) for v in g.nodes]
        nx.draw_networkx(g, pos, ax=ax, node_size=sizes, font_size=6,
                         node_color="tab:orange", edge_color="gray")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
