"""Figure rendering for evaluation reports.

All functions write PNG files next to the delimited report output; nothing
here opens a window (Agg backend).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluator import EvalReport, align_labels, roc_curve
from .frames_io import LabelSeries
from .scorer import ScoreSeries


def save_score_curve(series: ScoreSeries, labels: LabelSeries | None, path: str | Path) -> Path:
    """Regular score over frame index, abnormal spans shaded."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = np.arange(len(series)) + series.frame_offset
    fig, ax = plt.subplots(figsize=(9, 3))
    ax.plot(frames, series.s, lw=1.0, color="tab:blue", label="regular score S")
    if labels is not None:
        aligned = align_labels(series, labels)
        ax.fill_between(
            frames, 0, 1, where=aligned == 1, color="tab:red", alpha=0.2, label="abnormal (ground truth)"
        )
    ax.set_xlabel("frame")
    ax.set_ylabel("S")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"{series.video_id}")
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_roc(scores: np.ndarray, labels: np.ndarray, auc: float, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    curve = roc_curve(scores, labels)
    fpr = [p[0] for p in curve]
    tpr = [p[1] for p in curve]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(fpr, tpr, color="tab:blue", lw=1.5)
    ax.plot([0, 1], [0, 1], ls="--", color="gray", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"frame-level ROC (AUC = {auc:.4f})")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_ablation_bars(reports: Sequence[EvalReport], path: str | Path) -> Path:
    """AUC and score gap per loss variant, one bar group each."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [r.variant or f"variant {i}" for i, r in enumerate(reports)]
    x = np.arange(len(reports))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.5))
    ax1.bar(x, [r.auc for r in reports], color="tab:blue")
    ax1.set_xticks(x, names, rotation=20, ha="right", fontsize=8)
    ax1.set_ylabel("frame AUC")
    ax1.set_ylim(0, 1)
    ax2.bar(x, [r.delta_s for r in reports], color="tab:orange")
    ax2.set_xticks(x, names, rotation=20, ha="right", fontsize=8)
    ax2.set_ylabel("score gap")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
