"""Frame-level evaluation: ROC/AUC, score gap, and the loss-ablation harness.

Convention: regular scores S live in [0, 1] with high = normal; the ROC
treats abnormal as the positive class and uses 1 - S as the anomaly score.
Ties get half credit (Mann-Whitney). Scores from all test videos are
concatenated after per-video normalization, then a single AUC is computed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LengthMismatchError, SingleClassError
from .frames_io import FrameSequence, LabelSeries
from .losses import LossWeights
from .scorer import ScoreSeries, score_video, write_score_csv
from .trainer import TrainConfig, train
from . import checkpoint as ckpt_io


def _validate(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise LengthMismatchError(f"scores ({scores.shape}) and labels ({labels.shape}) must be equal-length 1-D")
    if scores.size < 1:
        raise LengthMismatchError("need at least one frame")
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise SingleClassError("need at least one normal and one abnormal frame")
    return scores, labels


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def frame_auc(scores, labels) -> float:
    """Area under the ROC of (1 - S) against abnormal labels, ties half-credited."""
    scores, labels = _validate(scores, labels)
    anomaly = 1.0 - scores
    ranks = _average_ranks(anomaly)
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_curve(scores, labels) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) triples from threshold +inf down to min score.

    Thresholds are on the anomaly score 1 - S; a frame is flagged when its
    anomaly score >= threshold. The trapezoidal integral of the curve equals
    :func:`frame_auc`.
    """
    scores, labels = _validate(scores, labels)
    anomaly = 1.0 - scores
    order = np.argsort(-anomaly, kind="mergesort")
    sorted_scores = anomaly[order]
    sorted_labels = labels[order]
    tps = np.cumsum(sorted_labels == 1)
    fps = np.cumsum(sorted_labels == 0)
    # keep the last index of each tie group so every threshold is distinct
    distinct = np.r_[np.nonzero(np.diff(sorted_scores))[0], len(sorted_scores) - 1]
    n_pos, n_neg = tps[-1], fps[-1]
    curve = [(0.0, 0.0, float("inf"))]
    for idx in distinct:
        curve.append((fps[idx] / n_neg, tps[idx] / n_pos, float(sorted_scores[idx])))
    return curve


def roc_auc_trapezoid(curve: Sequence[tuple[float, float, float]]) -> float:
    fpr = np.array([p[0] for p in curve])
    tpr = np.array([p[1] for p in curve])
    return float(np.trapezoid(tpr, fpr))


def score_gap(scores, labels) -> float:
    """Mean regular score of normal frames minus that of abnormal frames."""
    scores, labels = _validate(scores, labels)
    return float(scores[labels == 0].mean() - scores[labels == 1].mean())


def align_labels(series: ScoreSeries, labels: LabelSeries) -> np.ndarray:
    """Drop the first frame_offset labels so labels[i] matches series.s[i]."""
    expected_full = len(series) + series.frame_offset
    if len(labels) == expected_full:
        return np.asarray(labels.labels[series.frame_offset :])
    if len(labels) == len(series):
        return np.asarray(labels.labels)
    raise LengthMismatchError(
        f"video {series.video_id}: {len(labels)} labels cannot align with "
        f"{len(series)} scores at offset {series.frame_offset} "
        f"(expected {expected_full} or {len(series)})"
    )


def concatenate(per_video: Sequence[tuple[ScoreSeries, LabelSeries]]) -> tuple[np.ndarray, np.ndarray]:
    scores = np.concatenate([series.s for series, _ in per_video])
    labels = np.concatenate([align_labels(series, labels) for series, labels in per_video])
    return scores, labels


@dataclass(frozen=True)
class EvalReport:
    auc: float
    delta_s: float
    per_video: tuple[tuple[ScoreSeries, LabelSeries], ...]
    config_hash: str = ""
    checkpoint_id: str = ""
    variant: str = ""
    notes: str = ""

    def __post_init__(self):
        assert 0.0 <= self.auc <= 1.0


def evaluate(
    per_video: Sequence[tuple[ScoreSeries, LabelSeries]],
    config_hash: str = "",
    checkpoint_id: str = "",
    variant: str = "",
    notes: str = "",
) -> EvalReport:
    scores, labels = concatenate(per_video)
    return EvalReport(
        auc=frame_auc(scores, labels),
        delta_s=score_gap(scores, labels),
        per_video=tuple(per_video),
        config_hash=config_hash,
        checkpoint_id=checkpoint_id,
        variant=variant,
        notes=notes,
    )


def config_hash(cfg: TrainConfig) -> str:
    payload = json.dumps(dataclasses.asdict(cfg), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def write_report(report: EvalReport, out_dir: str | Path) -> Path:
    """Human-readable summary plus machine-readable CSVs (one per video)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        f"variant:        {report.variant or 'default'}",
        f"frame AUC:      {report.auc:.4f}",
        f"score gap:      {report.delta_s:.4f}",
        f"config hash:    {report.config_hash}",
        f"checkpoint id:  {report.checkpoint_id}",
        "aggregation:    per-video min-max normalization, then concatenation",
    ]
    if report.notes:
        lines.append(f"notes:          {report.notes}")
    lines.append("")
    lines.append(f"{'video':24s} {'frames':>8s} {'abnormal':>9s} {'mean S':>8s}")
    for series, labels in report.per_video:
        aligned = align_labels(series, labels)
        lines.append(
            f"{series.video_id:24s} {len(series):8d} {int(aligned.sum()):9d} {series.s.mean():8.4f}"
        )
        write_score_csv(out_dir / f"scores_{series.video_id}.csv", series)
    text = "\n".join(lines) + "\n"
    (out_dir / "report.txt").write_text(text)
    with open(out_dir / "report.csv", "w") as fh:
        fh.write("variant,auc,delta_s,config_hash,checkpoint_id\n")
        fh.write(f"{report.variant or 'default'},{report.auc:.6f},{report.delta_s:.6f},"
                 f"{report.config_hash},{report.checkpoint_id}\n")
    return out_dir / "report.txt"


@dataclass(frozen=True)
class AblationVariant:
    name: str
    weights: LossWeights


def default_ablation_grid() -> list[AblationVariant]:
    """The four cumulative loss combinations, weakest to full model."""
    return [
        AblationVariant("intensity", LossWeights(1.0, 0.0, 0.0, 0.0)),
        AblationVariant("intensity+gradient", LossWeights(1.0, 1.0, 0.0, 0.0)),
        AblationVariant("intensity+gradient+adversarial", LossWeights(1.0, 1.0, 0.0, 0.05)),
        AblationVariant("full", LossWeights(1.0, 1.0, 2.0, 0.05)),
    ]


def run_ablation(
    grid: Sequence[AblationVariant],
    base_cfg: TrainConfig,
    train_dataset: Sequence[FrameSequence],
    test_items: Sequence[tuple[FrameSequence, LabelSeries]],
    out_dir: str | Path,
) -> list[EvalReport]:
    """Train and evaluate one model per loss variant; emit a comparison table."""
    out_dir = Path(out_dir)
    reports = []
    for variant in grid:
        cfg = replace(base_cfg, weights=variant.weights)
        run_dir = out_dir / variant.name.replace("+", "_")
        ckpt_path = train(cfg, train_dataset, run_dir)
        gen, _ = ckpt_io.load_generator(ckpt_path)
        per_video = [(score_video(gen, seq), labels) for seq, labels in test_items]
        report = evaluate(
            per_video,
            config_hash=config_hash(cfg),
            checkpoint_id=ckpt_io.checkpoint_id(ckpt_path),
            variant=variant.name,
        )
        write_report(report, run_dir / "eval")
        reports.append(report)
    write_ablation_table(reports, out_dir)
    return reports


def write_ablation_table(reports: Sequence[EvalReport], out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"{'variant':36s} {'AUC':>8s} {'gap':>8s}"]
    for r in reports:
        lines.append(f"{r.variant:36s} {r.auc:8.4f} {r.delta_s:8.4f}")
    table = "\n".join(lines) + "\n"
    (out_dir / "ablation.txt").write_text(table)
    with open(out_dir / "ablation.csv", "w") as fh:
        fh.write("variant,auc,delta_s,config_hash,checkpoint_id\n")
        for r in reports:
            fh.write(f"{r.variant},{r.auc:.6f},{r.delta_s:.6f},{r.config_hash},{r.checkpoint_id}\n")
    return out_dir / "ablation.csv"
