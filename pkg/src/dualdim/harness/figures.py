"""Rendering of analysis tables to PNG files (headless backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_lower_bound_histogram(fragment: dict, direction: str, path: str):
    """Overlaid bound histograms for the two checkpoints of one direction."""
    edges = [row[0] for row in fragment["histogram"]]
    sup = [row[1] for row in fragment["histogram"]]
    dim = [row[2] for row in fragment["histogram"]]
    width = (edges[1] - edges[0]) if len(edges) > 1 else 1.0
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(edges, sup, width=width, align="edge", alpha=0.5,
           label=f"supervised (mean {fragment['super_mean']:.2f})")
    ax.bar(edges, dim, width=width, align="edge", alpha=0.5,
           label=f"joint (mean {fragment['dim_mean']:.2f})")
    ax.set_xlabel(f"per-example lower bound ({direction} direction)")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_lambda_sweep(rows, path: str):
    lams = [r["lambda"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(lams)), [r["accuracy"] for r in rows], "o-",
            label="accuracy")
    ax.plot(range(len(lams)), [r["bleu4"] for r in rows], "s-", label="BLEU-4")
    ax.set_xticks(range(len(lams)))
    ax.set_xticklabels([str(l) for l in lams])
    ax.set_xlabel("coupling weight")
    ax.set_ylabel("test metric")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rank_distribution(records, path: str):
    ranks = [r["rank"] for r in records]
    top = max(ranks) if ranks else 1
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(ranks, bins=range(1, top + 2), align="left", rwidth=0.8)
    ax.set_xlabel("gold-signal rank within pool (1 = best)")
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_metric_correlation(trace, path: str):
    joint = [r for r in trace if r.get("phase") == "joint"]
    xs = [r["valid_accuracy"] for r in joint]
    ys = [r["valid_bleu4"] for r in joint]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(xs, ys)
    ax.set_xlabel("parser validation accuracy")
    ax.set_ylabel("generator validation BLEU-4")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
