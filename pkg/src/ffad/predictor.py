"""Future-frame U-Net generator and patch discriminator.

The generator consumes the t history frames channel-concatenated
(t * C input channels) and emits one C-channel frame at the same
resolution, squashed to [-1, 1]. Every encoder/decoder level keeps its
resolution through paired 3x3 convolutions, so skip connections concatenate
without crop or resize; 2x2 max pooling halves between levels and 3x3
transposed convolutions double on the way up.

The discriminator is a cascade of stride-2 3x3 convolutions ending in a
1-channel sigmoid head: one score in [0, 1] per input patch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .errors import ShapeError


@dataclass(frozen=True)
class GeneratorConfig:
    input_frames: int = 4
    channels_per_frame: int = 3
    base_width: int = 64
    depth: int = 4

    @property
    def in_channels(self) -> int:
        return self.input_frames * self.channels_per_frame

    @property
    def divisor(self) -> int:
        # resolution must be divisible by this for pooling/unpooling to mirror
        return 2 ** (self.depth - 1)


@dataclass(frozen=True)
class DiscriminatorConfig:
    in_channels: int = 3
    base_width: int = 64
    num_stages: int = 4


class _ConvPair(nn.Module):
    """Two 3x3 convolutions with ReLU, resolution preserved."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.act = nn.ReLU(inplace=True)

    def forward(self, x):
        return self.act(self.conv2(self.act(self.conv1(x))))


class UNetGenerator(nn.Module):
    def __init__(self, config: GeneratorConfig = GeneratorConfig()):
        super().__init__()
        self.config = config
        widths = [config.base_width * 2**i for i in range(config.depth)]
        self.encoders = nn.ModuleList()
        cin = config.in_channels
        for w in widths:
            self.encoders.append(_ConvPair(cin, w))
            cin = w
        self.pool = nn.MaxPool2d(2)
        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for i in range(config.depth - 1, 0, -1):
            self.upsamplers.append(
                nn.ConvTranspose2d(widths[i], widths[i - 1], 3, stride=2, padding=1, output_padding=1)
            )
            self.decoders.append(_ConvPair(2 * widths[i - 1], widths[i - 1]))
        self.head = nn.Conv2d(widths[0], config.channels_per_frame, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != cfg.in_channels:
            raise ShapeError(f"expected (B, {cfg.in_channels}, H, W) input, got {tuple(x.shape)}")
        if x.shape[2] % cfg.divisor or x.shape[3] % cfg.divisor:
            raise ShapeError(f"resolution {x.shape[2]}x{x.shape[3]} not divisible by {cfg.divisor}")
        skips = []
        for i, enc in enumerate(self.encoders):
            x = enc(x)
            if i < len(self.encoders) - 1:
                skips.append(x)
                x = self.pool(x)
        for up, dec, skip in zip(self.upsamplers, self.decoders, reversed(skips)):
            x = up(x)
            assert x.shape[2:] == skip.shape[2:], "skip connection resolution mismatch"
            x = dec(torch.cat([x, skip], dim=1))
        return torch.tanh(self.head(x))


class PatchDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig = DiscriminatorConfig()):
        super().__init__()
        self.config = config
        layers = []
        cin = config.in_channels
        for i in range(config.num_stages):
            cout = config.base_width * 2**i
            layers += [nn.Conv2d(cin, cout, 3, stride=2, padding=1), nn.LeakyReLU(0.2, inplace=True)]
            cin = cout
        layers.append(nn.Conv2d(cin, 1, 3, padding=1))
        self.stages = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ShapeError(f"expected (B, {self.config.in_channels}, H, W) input, got {tuple(x.shape)}")
        return torch.sigmoid(self.stages(x)).squeeze(1)


def patch_grid_size(resolution: int, num_stages: int) -> int:
    """Side length of the discriminator score grid for a square input."""
    r = resolution
    for _ in range(num_stages):
        r = (r + 1) // 2  # conv k3 s2 p1: ceil(r / 2)
    return r


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def build_models(
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    seed: int,
    dtype: torch.dtype = torch.float32,
) -> tuple[UNetGenerator, PatchDiscriminator]:
    """Construct G and D with torch's fan-in-scaled default init under a recorded seed."""
    torch.manual_seed(seed)
    gen = UNetGenerator(gen_cfg).to(dtype)
    disc = PatchDiscriminator(disc_cfg).to(dtype)
    return gen, disc


def frames_to_input(frames: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(t, H, W, C) or (B, t, H, W, C) numpy -> (B, t*C, H, W) torch."""
    if frames.ndim == 4:
        frames = frames[None]
    if frames.ndim != 5:
        raise ShapeError(f"expected 4-D or 5-D frame stack, got shape {frames.shape}")
    b, t, h, w, c = frames.shape
    tensor = torch.from_numpy(np.ascontiguousarray(frames)).to(dtype)
    return tensor.permute(0, 1, 4, 2, 3).reshape(b, t * c, h, w)


def frame_to_tensor(frame: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(H, W, C) or (B, H, W, C) numpy -> (B, C, H, W) torch."""
    if frame.ndim == 3:
        frame = frame[None]
    tensor = torch.from_numpy(np.ascontiguousarray(frame)).to(dtype)
    return tensor.permute(0, 3, 1, 2)


def tensor_to_frame(tensor: torch.Tensor) -> np.ndarray:
    """(B, C, H, W) torch -> (H, W, C) numpy for B == 1, else (B, H, W, C)."""
    array = tensor.detach().permute(0, 2, 3, 1).cpu().numpy()
    return array[0] if array.shape[0] == 1 else array


@torch.no_grad()
def predict_next(gen: UNetGenerator, history: np.ndarray) -> np.ndarray:
    """Predict the frame following ``history`` ((t, H, W, C), values in [-1, 1])."""
    cfg = gen.config
    if history.ndim != 4 or history.shape[0] != cfg.input_frames:
        raise ShapeError(f"need exactly {cfg.input_frames} history frames, got shape {history.shape}")
    if history.shape[3] != cfg.channels_per_frame:
        raise ShapeError(f"expected {cfg.channels_per_frame} channels, got {history.shape[3]}")
    dtype = next(gen.parameters()).dtype
    out = gen(frames_to_input(history, dtype))
    return tensor_to_frame(out)


def discriminate(disc: PatchDiscriminator, frame: np.ndarray) -> np.ndarray:
    """Patch score map in [0, 1] for a single (H, W, C) frame."""
    dtype = next(disc.parameters()).dtype
    with torch.no_grad():
        scores = disc(frame_to_tensor(frame, dtype))
    return scores[0].cpu().numpy()
