"""Figures written next to the CLI's tabular output (Agg backend, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.collections import PolyCollection  # noqa: E402

from .export import region_fill  # noqa: E402

plt.rcParams.update({
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "savefig.dpi": 150,
})


def plot_layout(surface, path, title: str | None = None):
    """Region supports filled by kind, domain outline on top."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for r in surface.regions:
        polys = r.support if r.support is not None else surface.domain.outline_pieces()
        ax.add_collection(PolyCollection(polys, facecolors=region_fill(r), edgecolors="#222",
                                         linewidths=0.05, alpha=0.85))
    for p in surface.domain.outline_pieces():
        ax.fill(p[:, 0], p[:, 1], fill=False, ec="k", lw=0.6)
    x0, y0, x1, y1 = surface.domain.bounds
    pad = 0.02 * max(x1 - x0, y1 - y0)
    ax.set_xlim(x0 - pad, x1 + pad)
    ax.set_ylim(y0 - pad, y1 + pad)
    ax.set_aspect("equal")
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_convergence(rows, path, columns=("R", "bound")):
    """Resistance-like columns against ``n`` with the 1/2 floor marked."""
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ns = [r["n"] for r in rows]
    for col, marker in zip(columns, "os^"):
        ys = [r.get(col) for r in rows]
        if any(y is not None for y in ys):
            ax.plot(ns, ys, marker=marker, label=col)
    ax.axhline(0.5, color="0.4", ls="--", lw=0.8, label="1/2")
    if ns and max(ns) > 100 * max(min(ns), 1):
        ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("resistance")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_packing(layout, path):
    fig, ax = plt.subplots(figsize=(5, 5))
    t = layout.target
    ax.fill(t[:, 0], t[:, 1], fc="#eeeeee", ec="k", lw=0.6)
    cmap = plt.get_cmap("viridis")
    rounds = max(layout.rounds, 1)
    polys = [c.polygon for c in layout.copies]
    colors = [cmap((c.round - 1) / rounds) for c in layout.copies]
    ax.add_collection(PolyCollection(polys, facecolors=colors, edgecolors="none"))
    ax.set_aspect("equal")
    ax.autoscale_view()
    ax.set_title(f"{len(polys)} copies, uncovered {layout.uncovered_fraction:.3f}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
