# evaluation/plotting.py
# Optional figures (needs the `viz` extra).
from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path

from matplotlib import gridspec, pyplot
from matplotlib.figure import Figure
import numpy as np

from evaluation.metrics import roc_curve
from evaluation.ood import EvaluatedSet, Positives, detection_scores
from utils.data.samples import DistributionTag

__all__ = ["plot_entropy_by_distribution", "plot_ood_roc", "save_figure"]

SetsByMethod = Mapping[str, Mapping[DistributionTag, EvaluatedSet]]


def plot_entropy_by_distribution(
    sets: SetsByMethod, title: str = "Predictive uncertainty"
) -> Figure:
    """One panel per method: uncertainty box plot per evaluated distribution."""
    methods = list(sets)
    fig = pyplot.figure(figsize=(3.2 * max(len(methods), 1), 3.4))
    gs = gridspec.GridSpec(1, max(len(methods), 1), figure=fig)
    for i, method in enumerate(methods):
        ax = fig.add_subplot(gs[0, i])
        tags = list(sets[method])
        data = [np.array([r.uncertainty for r in sets[method][t].records]) for t in tags]
        ax.boxplot(data, showfliers=False)
        ax.set_xticks(range(1, len(tags) + 1), [t.value for t in tags], rotation=45, fontsize=7)
        ax.set_title(method, fontsize=9)
        ax.grid(True, axis="y", linestyle="--", linewidth=0.5)
        if i == 0:
            ax.set_ylabel("Uncertainty", fontsize=9)
    fig.suptitle(title, fontsize=10)
    pyplot.tight_layout()
    return fig


def plot_ood_roc(
    sets: SetsByMethod,
    id_tag: DistributionTag,
    ood_tag: DistributionTag,
    positives: Positives = "shifted",
    id_overrides: Mapping[str, DistributionTag] | None = None,
) -> Figure:
    """ROC of uncertainty-based OOD detection, one curve per method."""
    overrides = dict(id_overrides or {})
    fig = pyplot.figure(figsize=(4.0, 4.0))
    ax = fig.add_subplot(1, 1, 1)
    for method, by_tag in sets.items():
        ref = overrides.get(method, id_tag)
        if ref not in by_tag or ood_tag not in by_tag:
            continue
        fpr, tpr = roc_curve(detection_scores(by_tag[ref], by_tag[ood_tag], positives))
        ax.step(fpr, tpr, where="post", linewidth=1.0, label=f"{method} (vs {ref})")
    ax.plot([0, 1], [0, 1], linestyle="--", linewidth=0.8, color="grey")
    ax.set_xlabel("FPR", fontsize=9)
    ax.set_ylabel("TPR", fontsize=9)
    ax.set_title(f"OOD detection: {ood_tag}", fontsize=9)
    ax.legend(fontsize=7, framealpha=0.9, loc="lower right")
    ax.grid(True, which="both", linestyle="--", linewidth=0.5)
    pyplot.tight_layout()
    return fig


def save_figure(fig: Figure, path: str | Path, dpi: int = 150) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    pyplot.close(fig)
    return path
