"""Frame loading, normalization and clip sampling.

Dataset layout on disk:

    <root>/<split>/<video_id>/<frame files>     (PNG mandatory, JPEG optional)
    <root>/labels/<video_id>.txt                (one 0/1 per line, test videos)

Frames are decoded, resized to a square target with bilinear interpolation
(no aspect preservation) and mapped to [-1, 1] via x / 127.5 - 1.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DecodeError,
    EmptyDirectoryError,
    ParseError,
    ShapeMismatchError,
    TooShortError,
)

SUPPORTED_EXTENSIONS = (".png", ".jpg", ".jpeg")

DEFAULT_CLIP_HISTORY = 4  # t: frames observed before the predicted one


@dataclass(frozen=True)
class IngestConfig:
    resize_target: int = 256
    color_mode: str = "auto"  # auto | gray | color
    extensions: tuple[str, ...] = SUPPORTED_EXTENSIONS

    def __post_init__(self):
        if self.color_mode not in ("auto", "gray", "color"):
            raise ValueError(f"unknown color_mode {self.color_mode!r}")
        if self.resize_target < 1:
            raise ValueError("resize_target must be >= 1")


@dataclass(frozen=True)
class RawFrame:
    """Decoded 8-bit image before normalization."""

    pixels: np.ndarray  # uint8, (H, W) or (H, W, 3)
    source_path: str

    def __post_init__(self):
        if self.pixels.dtype != np.uint8:
            raise ValueError("RawFrame pixels must be uint8")
        if self.pixels.ndim not in (2, 3):
            raise ValueError("RawFrame pixels must be 2-D or 3-D")
        if self.pixels.ndim == 3 and self.pixels.shape[2] != 3:
            raise ValueError("color RawFrame must have 3 channels")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("RawFrame must be at least 1x1")


@dataclass(frozen=True)
class FrameSequence:
    """All frames of one video: (N, H, W, C) float32 in [-1, 1]."""

    video_id: str
    frames: np.ndarray
    source_paths: tuple[str, ...] = ()

    def __len__(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class Clip:
    """t+1 consecutive frames; the last one is the prediction target."""

    frames: np.ndarray  # (t+1, H, W, C)
    video_id: str
    start_index: int


@dataclass(frozen=True)
class LabelSeries:
    """Per-frame ground truth for one test video (1 = abnormal)."""

    labels: np.ndarray  # int array of 0/1
    video_id: str

    def __len__(self) -> int:
        return len(self.labels)


def normalize(pixels: np.ndarray) -> np.ndarray:
    """Map 8-bit intensities to float32 in [-1, 1]."""
    return pixels.astype(np.float32) / 127.5 - 1.0


def denormalize(data: np.ndarray) -> np.ndarray:
    """Inverse of :func:`normalize`, rounded back to uint8."""
    return np.clip(np.rint((data + 1.0) * 127.5), 0, 255).astype(np.uint8)


def _decode(path: Path, color_mode: str) -> tuple[np.ndarray, str]:
    try:
        with Image.open(path) as img:
            if color_mode == "auto":
                mode = "L" if img.mode in ("L", "1", "I", "I;16") else "RGB"
            else:
                mode = "L" if color_mode == "gray" else "RGB"
            return np.asarray(img.convert(mode)), mode
    except (OSError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc


def _resize(pixels: np.ndarray, target: int) -> np.ndarray:
    if pixels.shape[0] == target and pixels.shape[1] == target:
        return pixels
    img = Image.fromarray(pixels)
    return np.asarray(img.resize((target, target), Image.BILINEAR))


def list_frame_files(dir: Path, extensions=SUPPORTED_EXTENSIONS) -> list[Path]:
    """Frame files of a video directory in lexicographic order."""
    files = [p for p in dir.iterdir() if p.suffix.lower() in extensions and p.is_file()]
    return sorted(files, key=lambda p: p.name)


def load_video_frames(dir: str | Path, config: IngestConfig = IngestConfig()) -> FrameSequence:
    """Load one video directory into a normalized frame sequence.

    Ordering is lexicographic in the file names, so reloading a directory
    always yields the identical sequence.
    """
    dir = Path(dir)
    if not dir.is_dir():
        raise EmptyDirectoryError(f"{dir} is not a directory")
    files = list_frame_files(dir, config.extensions)
    if not files:
        raise EmptyDirectoryError(f"no frames with extensions {config.extensions} in {dir}")

    frames = []
    first_shape = None
    first_mode = None
    mode = config.color_mode
    for path in files:
        pixels, decoded_mode = _decode(path, mode)
        if mode == "auto":
            mode = "gray" if decoded_mode == "L" else "color"
        if first_shape is None:
            first_shape, first_mode = pixels.shape, decoded_mode
        elif pixels.shape != first_shape or decoded_mode != first_mode:
            raise ShapeMismatchError(
                f"{path} decodes to shape {pixels.shape}/{decoded_mode}, "
                f"expected {first_shape}/{first_mode} from {files[0]}"
            )
        pixels = _resize(pixels, config.resize_target)
        frame = normalize(pixels)
        if frame.ndim == 2:
            frame = frame[:, :, None]
        assert frame.min() >= -1.0 and frame.max() <= 1.0
        frames.append(frame)

    return FrameSequence(
        video_id=dir.name,
        frames=np.stack(frames),
        source_paths=tuple(str(p) for p in files),
    )


def load_split(root: str | Path, split: str, config: IngestConfig = IngestConfig()) -> list[FrameSequence]:
    """Load every video directory under ``<root>/<split>``, sorted by id."""
    split_dir = Path(root) / split
    if not split_dir.is_dir():
        raise EmptyDirectoryError(f"{split_dir} is not a directory")
    video_dirs = sorted(p for p in split_dir.iterdir() if p.is_dir())
    if not video_dirs:
        raise EmptyDirectoryError(f"no video directories in {split_dir}")
    return [load_video_frames(p, config) for p in video_dirs]


def labels_path(root: str | Path, video_id: str) -> Path:
    return Path(root) / "labels" / f"{video_id}.txt"


def sample_clip(
    seq: FrameSequence,
    rng: np.random.Generator,
    t: int = DEFAULT_CLIP_HISTORY,
) -> Clip:
    """Draw a clip of t+1 consecutive frames, start index uniform."""
    n = len(seq)
    if n < t + 1:
        raise TooShortError(f"video {seq.video_id} has {n} frames, need {t + 1}")
    start = int(rng.integers(0, n - t))  # inclusive range [0, n-t-1]
    return Clip(frames=seq.frames[start : start + t + 1], video_id=seq.video_id, start_index=start)


def load_labels(path: str | Path) -> LabelSeries:
    """Parse a label file: one 0/1 per line, or CSV ``frame_index,label``."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"label file {path} does not exist")
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            field_str = line.split(",")[-1] if "," in line else line
            try:
                value = int(field_str)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: cannot parse {line!r}") from exc
            if value not in (0, 1):
                raise ValueError(f"{path}:{lineno}: label {value} not in {{0, 1}}")
            labels.append(value)
    return LabelSeries(labels=np.asarray(labels, dtype=np.int64), video_id=path.stem)


def save_labels(path: str | Path, labels: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")
