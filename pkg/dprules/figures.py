# figures.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
SVG figures of a run: the Jaccard distance heatmap of the extracted rules
with their dendrogram, supports and importances, the dendrogram alone, and
bar charts of the conformance metrics per trace group.
"""

from typing import Dict, Sequence

import matplotlib
matplotlib.use("Agg")
import numpy as np
import pandas as pd
from matplotlib import colormaps, colors
from matplotlib.figure import Figure
from scipy.cluster.hierarchy import dendrogram as scipy_dendrogram

from .clustering import Dendrogram
from .df import METRIC_COLUMNS
from .util import log

# fixed ids and no timestamp, so equal figures give equal files
matplotlib.rcParams['svg.hashsalt'] = 'dprules'

PLOTTED_METRICS = METRIC_COLUMNS[4:]


def save_figure(fig: Figure, path: str):
    fig.savefig(path, format="svg", metadata={'Date': None})
    log.info(f"wrote figure {path}")


def importance_colors(coefficients: Sequence[float]) -> list:
    """RGBA colors on the red-yellow-green scale, symmetric around 0: the
    largest positive coefficient is the darkest green, the most negative
    one the darkest red."""
    c = np.asarray(coefficients, dtype=float)
    vmax = float(np.abs(c).max()) if len(c) else 0.0
    norm = colors.Normalize(-vmax, vmax) if vmax > 0 else colors.Normalize(-1, 1)
    return [tuple(colormaps['RdYlGn'](norm(v))) for v in c]


def _leaf_order(dendrogram: Dendrogram, ax=None) -> list:
    if dendrogram.n < 2:
        return list(range(dendrogram.n))
    d = scipy_dendrogram(dendrogram.to_linkage(), orientation='left', ax=ax,
                         no_plot=ax is None, no_labels=True,
                         color_threshold=0, above_threshold_color='k')
    return list(d['leaves'])


def heatmap_figure(dm: np.ndarray, dendrogram: Dendrogram,
                   labels: Sequence[str], support_pos: Sequence[float],
                   support_neg: Sequence[float],
                   coefficients: Sequence[float]) -> Figure:
    """Distance heatmap with the dendrogram on the left and three side
    columns: support in L+, support in L- (orange) and importance
    (green-red).

    :param dm: square Jaccard distance matrix in rule order
    :param labels: rule names in rule order
    """
    n = len(labels)
    size = max(4.0, 0.3 * n + 2.0)
    fig = Figure(figsize=(size + 3.0, size))
    grid = fig.add_gridspec(1, 5, width_ratios=[2.0, 6.0, 0.4, 0.4, 0.4],
                            wspace=0.05)
    ax_tree = fig.add_subplot(grid[0, 0])
    ax_heat = fig.add_subplot(grid[0, 1])
    side = [fig.add_subplot(grid[0, k]) for k in (2, 3, 4)]

    order = _leaf_order(dendrogram, ax_tree if n >= 2 else None)
    ax_tree.set_axis_off()
    extent = (-0.5, n - 0.5, -0.5, n - 0.5)
    matrix = np.asarray(dm, dtype=float)[np.ix_(order, order)]
    image = ax_heat.imshow(matrix, cmap='Blues_r', vmin=0.0, vmax=1.0,
                           origin='lower', aspect='auto', extent=extent)
    ax_heat.set_xticks(range(n))
    ax_heat.set_xticklabels([labels[i] for i in order], rotation=90, fontsize=7)
    ax_heat.set_yticks([])

    oranges = colormaps['Oranges']
    importance = importance_colors(coefficients)
    columns = [("L+", [oranges(support_pos[i]) for i in order]),
               ("L-", [oranges(support_neg[i]) for i in order]),
               ("Imp.", [importance[i] for i in order])]
    for ax, (title, cells) in zip(side, columns):
        ax.imshow(np.array(cells).reshape(n, 1, 4), origin='lower',
                  aspect='auto', extent=(-0.5, 0.5, -0.5, n - 0.5))
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_title(title, fontsize=8)
    side[-1].yaxis.tick_right()
    side[-1].set_yticks(range(n))
    side[-1].set_yticklabels([labels[i] for i in order], fontsize=7)
    fig.colorbar(image, ax=ax_heat, location='bottom', fraction=0.04,
                 label='Jaccard distance')
    return fig


def dendrogram_figure(dendrogram: Dendrogram, labels: Sequence[str]) -> Figure:
    fig = Figure(figsize=(6.0, max(3.0, 0.3 * len(labels) + 1.0)))
    ax = fig.add_subplot(1, 1, 1)
    if dendrogram.n < 2:
        ax.text(0.5, 0.5, labels[0] if labels else "", ha='center')
        ax.set_axis_off()
        return fig
    scipy_dendrogram(dendrogram.to_linkage(), orientation='left', ax=ax,
                     labels=list(labels), color_threshold=0,
                     above_threshold_color='k')
    ax.set_xlabel('average Jaccard distance')
    return fig


def metrics_figure(metrics: pd.DataFrame) -> Figure:
    """One bar chart per metric, grouped by trace group with one bar per
    miner; groups without a model are left empty."""
    groups = list(dict.fromkeys(metrics['Group']))
    miners = list(dict.fromkeys(metrics['Miner']))
    fig = Figure(figsize=(max(6.0, 1.2 * len(groups) + 2.0),
                          2.2 * len(PLOTTED_METRICS)), layout='constrained')
    axes = fig.subplots(len(PLOTTED_METRICS), 1, sharex=True)
    width = 0.8 / max(len(miners), 1)
    x = np.arange(len(groups))
    palette = colormaps['tab10']
    for ax, metric in zip(axes, PLOTTED_METRICS):
        for k, miner in enumerate(miners):
            rows = metrics[metrics['Miner'] == miner].set_index('Group')
            values = [rows[metric].get(g) if g in rows.index else None
                      for g in groups]
            heights = [np.nan if v is None or pd.isna(v) else float(v)
                       for v in values]
            ax.bar(x + (k - (len(miners) - 1) / 2) * width, heights, width,
                   label=miner, color=palette(k % 10))
        ax.set_ylabel(metric, fontsize=8)
        ax.axhline(0, color='k', linewidth=0.5)
        ax.grid(True, axis='y', linestyle='--', alpha=0.3)
    axes[-1].set_xticks(x)
    axes[-1].set_xticklabels(groups, rotation=45, ha='right', fontsize=8)
    axes[0].legend(loc='upper left', bbox_to_anchor=(1.01, 1.0), fontsize=8)
    return fig


def placeholder_figure(message: str) -> Figure:
    fig = Figure(figsize=(4.0, 2.0))
    ax = fig.add_subplot(1, 1, 1)
    ax.text(0.5, 0.5, message, ha='center', va='center')
    ax.set_axis_off()
    return fig


def emit_figures(directory: str, dm: np.ndarray, dendrogram: Dendrogram,
                 labels: Sequence[str], support_pos: Sequence[float],
                 support_neg: Sequence[float], coefficients: Sequence[float],
                 metrics: pd.DataFrame = None) -> Dict[str, str]:
    """Writes heatmap.svg, dendrogram.svg and (with a metrics table)
    metrics.svg into the directory; without rules the heatmap and the
    dendrogram are placeholders.

    :return: dict of figure name to file path
    """
    paths = {name: f"{directory}/{name}.svg"
             for name in ('heatmap', 'dendrogram', 'metrics')}
    if len(labels) == 0:
        log.warning("no important rules; writing placeholder figures")
        for name in ('heatmap', 'dendrogram'):
            save_figure(placeholder_figure("no important rules"), paths[name])
    else:
        save_figure(heatmap_figure(dm, dendrogram, labels, support_pos,
                                   support_neg, coefficients), paths['heatmap'])
        save_figure(dendrogram_figure(dendrogram, labels), paths['dendrogram'])
    if metrics is not None and len(metrics):
        save_figure(metrics_figure(metrics), paths['metrics'])
    else:
        del paths['metrics']
    return paths
