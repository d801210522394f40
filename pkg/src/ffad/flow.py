"""Differentiable optical flow: Horn-Schunck surrogate plus external adapter.

``estimate_flow(spec, a, b)`` returns the per-pixel displacement field from
``a`` to ``b``: content at pixel p in ``a`` sits at p + uv(p) in ``b``, so
``warp(b, uv)`` reconstructs ``a``.

The built-in surrogate runs a fixed number of Jacobi relaxation steps on the
brightness-constancy + smoothness energy. It is deterministic, has no
learnable parameters (kernels and the smoothness weight are buffers), and is
differentiable with respect to both input frames, which is what the motion
loss needs. Estimator parameters never receive gradients: the surrogate has
none, and the external adapter freezes whatever network it wraps.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeMismatchError, WeightsNotFoundError

SURROGATE_HS = "surrogate_hs"
EXTERNAL_NETWORK = "external_network"

# Rec. 601 luma weights, used to collapse color inputs for the surrogate
_LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class FlowEstimatorSpec:
    kind: str = SURROGATE_HS
    iterations: int = 50
    smoothness: float = 1.0
    weights_path: str | None = None

    def __post_init__(self):
        if self.kind not in (SURROGATE_HS, EXTERNAL_NETWORK):
            raise ValueError(f"unknown flow estimator kind {self.kind!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.smoothness <= 0:
            raise ValueError("smoothness must be > 0")


def _pad_replicate(x: torch.Tensor, pad: tuple[int, int, int, int]) -> torch.Tensor:
    return F.pad(x, pad, mode="replicate")


class HornSchunckFlow(nn.Module):
    """Fixed-iteration Jacobi relaxation of the Horn-Schunck energy."""

    def __init__(self, iterations: int = 50, smoothness: float = 1.0):
        super().__init__()
        self.iterations = iterations
        k = 0.25
        self.register_buffer("kernel_x", torch.tensor([[[[-k, k], [-k, k]]]]))
        self.register_buffer("kernel_y", torch.tensor([[[[-k, -k], [k, k]]]]))
        self.register_buffer("kernel_t", torch.full((1, 1, 2, 2), k))
        self.register_buffer(
            "kernel_avg",
            torch.tensor([[[[1 / 12, 1 / 6, 1 / 12], [1 / 6, 0.0, 1 / 6], [1 / 12, 1 / 6, 1 / 12]]]]),
        )
        self.register_buffer("alpha", torch.tensor(float(smoothness)))

    def _gray(self, frame: torch.Tensor) -> torch.Tensor:
        if frame.shape[1] == 1:
            return frame
        w = torch.tensor(_LUMA, dtype=frame.dtype, device=frame.device).view(1, 3, 1, 1)
        return (frame * w).sum(dim=1, keepdim=True)

    def forward(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        """(B, C, H, W) frame pair -> (B, 2, H, W) flow (u, v)."""
        if a.shape != b.shape:
            raise ShapeMismatchError(f"frame shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
        a, b = self._gray(a), self._gray(b)
        kx = self.kernel_x.to(a.dtype)
        ky = self.kernel_y.to(a.dtype)
        kt = self.kernel_t.to(a.dtype)
        kavg = self.kernel_avg.to(a.dtype)
        pad = (0, 1, 0, 1)  # 2x2 kernels, replicate right/bottom
        fx = F.conv2d(_pad_replicate(a, pad), kx) + F.conv2d(_pad_replicate(b, pad), kx)
        fy = F.conv2d(_pad_replicate(a, pad), ky) + F.conv2d(_pad_replicate(b, pad), ky)
        ft = F.conv2d(_pad_replicate(b, pad), kt) - F.conv2d(_pad_replicate(a, pad), kt)
        denom = self.alpha.to(a.dtype) ** 2 + fx**2 + fy**2
        u = torch.zeros_like(fx)
        v = torch.zeros_like(fx)
        for _ in range(self.iterations):
            u_avg = F.conv2d(_pad_replicate(u, (1, 1, 1, 1)), kavg)
            v_avg = F.conv2d(_pad_replicate(v, (1, 1, 1, 1)), kavg)
            rate = (fx * u_avg + fy * v_avg + ft) / denom
            u = u_avg - fx * rate
            v = v_avg - fy * rate
        return torch.cat([u, v], dim=1)


class ExternalFlowEstimator(nn.Module):
    """Adapter freezing an externally supplied flow network.

    The wrapped module must map a (B, 2C, H, W) channel-concatenated frame
    pair to a (B, 2, H, W) flow field. Weights can be loaded from the npz
    container written by :func:`save_flow_network`.
    """

    def __init__(self, network: nn.Module, weights_path: str | None = None):
        super().__init__()
        if weights_path is not None:
            state = load_flow_network_state(weights_path)
            network.load_state_dict(state)
        self.network = network
        for p in self.network.parameters():
            p.requires_grad_(False)
        self.network.eval()

    def forward(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        if a.shape != b.shape:
            raise ShapeMismatchError(f"frame shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
        return self.network(torch.cat([a, b], dim=1))


def build_estimator(spec: FlowEstimatorSpec, network: nn.Module | None = None) -> nn.Module:
    if spec.kind == SURROGATE_HS:
        return HornSchunckFlow(iterations=spec.iterations, smoothness=spec.smoothness)
    if network is None:
        raise WeightsNotFoundError("external_network estimator needs a network instance")
    return ExternalFlowEstimator(network, weights_path=spec.weights_path)


def estimate_flow(spec: FlowEstimatorSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Single-pair numpy facade: (H, W, C) frames -> (H, W, 2) flow."""
    estimator = build_estimator(spec)
    ta = torch.from_numpy(np.ascontiguousarray(a)).permute(2, 0, 1)[None].double()
    tb = torch.from_numpy(np.ascontiguousarray(b)).permute(2, 0, 1)[None].double()
    with torch.no_grad():
        uv = estimator(ta, tb)
    return uv[0].permute(1, 2, 0).numpy()


def warp(frame: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Bilinear backward warp: out(p) = frame(p + uv(p)), border-clamped.

    frame (B, C, H, W), flow (B, 2, H, W).
    """
    if frame.shape[0] != flow.shape[0] or frame.shape[2:] != flow.shape[2:]:
        raise ShapeMismatchError(f"frame {tuple(frame.shape)} vs flow {tuple(flow.shape)}")
    b, _, h, w = frame.shape
    ys = torch.arange(h, dtype=frame.dtype, device=frame.device)
    xs = torch.arange(w, dtype=frame.dtype, device=frame.device)
    grid_y, grid_x = torch.meshgrid(ys, xs, indexing="ij")
    sample_x = grid_x[None] + flow[:, 0]
    sample_y = grid_y[None] + flow[:, 1]
    # normalize to [-1, 1] for grid_sample (align_corners=True convention)
    norm_x = 2.0 * sample_x / max(w - 1, 1) - 1.0
    norm_y = 2.0 * sample_y / max(h - 1, 1) - 1.0
    grid = torch.stack([norm_x, norm_y], dim=-1)
    return F.grid_sample(frame, grid, mode="bilinear", padding_mode="border", align_corners=True)


def warp_frame(frame: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Numpy facade of :func:`warp`: (H, W, C) frame, (H, W, 2) flow."""
    tf = torch.from_numpy(np.ascontiguousarray(frame)).permute(2, 0, 1)[None].double()
    tuv = torch.from_numpy(np.ascontiguousarray(flow)).permute(2, 0, 1)[None].double()
    return warp(tf, tuv)[0].permute(1, 2, 0).numpy()


FLOW_CONTAINER_VERSION = 1


def save_flow_network(path: str | Path, network: nn.Module) -> None:
    """Persist an external flow network in the npz container layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {f"module.{name}": t.detach().cpu().numpy() for name, t in network.state_dict().items()}
    arrays["meta"] = np.array(json.dumps({"format_version": FLOW_CONTAINER_VERSION, "kind": "flow_network"}))
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def load_flow_network_state(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise WeightsNotFoundError(f"flow network weights not found: {path}")
    with np.load(path) as archive:
        return {
            name[len("module.") :]: torch.from_numpy(archive[name])
            for name in archive.files
            if name.startswith("module.")
        }
