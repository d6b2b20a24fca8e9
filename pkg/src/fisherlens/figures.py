"""Report figures rendered straight to files (headless Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import ConfusionMatrix, TrialReport


def save_confusion_figure(cm: ConfusionMatrix, path):
    """Heatmap of the pooled confusion matrix with counts printed per cell."""
    counts = cm.counts
    names = [c.name for c in cm.classes]
    c = len(names)
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * c, 1.0 + 0.6 * c))
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(c), labels=names, rotation=45, ha="right")
    ax.set_yticks(range(c), labels=names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    threshold = counts.max() / 2 if counts.size else 0
    for i in range(c):
        for j in range(c):
            color = "white" if counts[i, j] > threshold else "black"
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center", color=color)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def save_accuracy_figure(report: TrialReport, path):
    """Per-trial accuracies with the mean drawn as a horizontal line."""
    acc = np.asarray(report.accuracies, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(range(len(acc)), acc, marker="o", label="trial accuracy")
    ax.axhline(report.mean, linestyle="--", color="gray", label=f"mean {report.mean:.4f}")
    ax.set_xlabel("trial")
    ax.set_ylabel("accuracy")
    ax.set_xticks(range(len(acc)))
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
