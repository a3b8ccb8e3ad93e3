"""Static SVG charts for reports.  matplotlib is imported lazily."""
from __future__ import annotations

import numpy as np

from .evalkit import METRICS

_LABEL = {"recall": "Recall", "ndcg": "NDCG", "hit_ratio": "HR", "precision": "Precision"}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed ids and no timestamp keep the SVG byte-stable
    matplotlib.rcParams["svg.hashsalt"] = "revgnn"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_report(report, path):
    """Bar chart of the four metrics of one evaluation."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    names = [f"{_LABEL[m]}@{report.k}" for m in METRICS]
    ax.bar(names, report.row(), color="#4c72b0")
    ax.set_ylim(0, max(1e-9, max(report.row())) * 1.15)
    ax.set_ylabel("value")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_ablation(results, path, k: int, metric: str = "recall"):
    """Median of ``metric`` per variant with min/max whiskers across seeds.

    A line chart is drawn when every variant is a ``C=<n>`` cluster setting.
    """
    plt = _pyplot()
    order = list(dict.fromkeys(r.variant for r in results))
    values = {v: np.array([r.metrics[metric] for r in results if r.variant == v]) for v in order}
    med = np.array([np.median(values[v]) for v in order])
    lo = med - np.array([values[v].min() for v in order])
    hi = np.array([values[v].max() for v in order]) - med
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    if all(v.startswith("C=") for v in order):
        xs = [int(v[2:]) for v in order]
        ax.errorbar(xs, med, yerr=[lo, hi], marker="o", capsize=3)
        ax.set_xlabel("number of clusters C")
        ax.set_xticks(xs)
    else:
        ax.bar(order, med, yerr=[lo, hi], capsize=3, color="#55a868")
    ax.set_ylabel(f"{_LABEL[metric]}@{k} (median)")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
