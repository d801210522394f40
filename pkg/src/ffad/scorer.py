"""Per-frame anomaly scoring: prediction PSNR and per-video normalization.

Frames are affinely mapped from [-1, 1] to [0, 1] before the MSE, and the
peak is fixed at 1.0, so PSNR depends only on the prediction error, never on
per-frame content. A small epsilon caps perfect predictions at 100 dB.

Frame k of a test video (k >= t) is scored against the prediction from
frames k-t .. k-1; the first t frames receive no score, so downstream label
series must be truncated by the same offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import EmptySeriesError, NonFiniteError, ShapeMismatchError, TooShortError
from .frames_io import FrameSequence
from .predictor import UNetGenerator, frames_to_input

PSNR_EPS = 1e-10
DEGENERATE_SPAN = 1e-9


def psnr(gt: np.ndarray, pred: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB between two [-1, 1] frames."""
    if gt.shape != pred.shape:
        raise ShapeMismatchError(f"shape mismatch: {gt.shape} vs {pred.shape}")
    a = (np.asarray(gt, dtype=np.float64) + 1.0) / 2.0
    b = (np.asarray(pred, dtype=np.float64) + 1.0) / 2.0
    mse = float(np.mean((a - b) ** 2))
    return 10.0 * math.log10(1.0 / (mse + PSNR_EPS))


def normalize_scores(psnr_values) -> np.ndarray:
    """Min-max normalize a PSNR series to [0, 1].

    A (near-)constant series normalizes to all ones: it carries no anomaly
    evidence, so every frame is treated as maximally regular.
    """
    values = np.asarray(psnr_values, dtype=np.float64)
    if values.size == 0:
        raise EmptySeriesError("cannot normalize an empty score series")
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("PSNR series contains non-finite values")
    span = values.max() - values.min()
    if span < DEGENERATE_SPAN:
        return np.ones_like(values)
    return (values - values.min()) / span


@dataclass(frozen=True)
class ScoreSeries:
    video_id: str
    psnr: np.ndarray  # dB, one per frame index >= frame_offset
    s: np.ndarray  # normalized regular scores in [0, 1]
    frame_offset: int

    def __len__(self) -> int:
        return len(self.psnr)


def score_video(gen: UNetGenerator, seq: FrameSequence, batch_size: int = 8) -> ScoreSeries:
    """PSNR and normalized score for every predictable frame of one video."""
    t = gen.config.input_frames
    n = len(seq)
    if n <= t:
        raise TooShortError(f"video {seq.video_id} has {n} frames, need more than {t}")
    dtype = next(gen.parameters()).dtype
    gen.eval()
    psnr_values = np.empty(n - t, dtype=np.float64)
    with torch.no_grad():
        for lo in range(t, n, batch_size):
            hi = min(lo + batch_size, n)
            windows = np.stack([seq.frames[k - t : k] for k in range(lo, hi)])
            preds = gen(frames_to_input(windows, dtype))
            preds = preds.permute(0, 2, 3, 1).cpu().numpy()
            for i, k in enumerate(range(lo, hi)):
                psnr_values[k - t] = psnr(seq.frames[k], preds[i])
    return ScoreSeries(
        video_id=seq.video_id,
        psnr=psnr_values,
        s=normalize_scores(psnr_values),
        frame_offset=t,
    )


def write_score_csv(path: str | Path, series: ScoreSeries) -> None:
    """One row per scored frame: original frame index, PSNR, normalized score."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("frame_index,psnr_db,score\n")
        for i, (p, s) in enumerate(zip(series.psnr, series.s)):
            fh.write(f"{i + series.frame_offset},{p:.6f},{s:.6f}\n")
