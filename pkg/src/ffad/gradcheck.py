"""Central finite-difference verification of analytic gradients.

Every suite runs at 64-bit precision on miniature shapes. The reported
metric is ``max|analytic - numeric| / max(max|numeric|, 1e-12)``; a suite
passes when it stays under the threshold (default 1e-3).

``corrupt`` deliberately biases the analytic gradient of one named suite so
detection itself can be tested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch

from .flow import HornSchunckFlow
from .losses import (
    adversarial_loss_d,
    adversarial_loss_g,
    flow_loss,
    gradient_loss,
    intensity_loss,
)
from .predictor import DiscriminatorConfig, GeneratorConfig, PatchDiscriminator, UNetGenerator

DEFAULT_THRESHOLD = 1e-3
DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_rel_error: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.threshold


def numeric_grad(f: Callable[[torch.Tensor], torch.Tensor], x: torch.Tensor, eps: float = DEFAULT_EPS) -> torch.Tensor:
    """Central differences of scalar f at x, element by element."""
    x = x.detach().clone()
    grad = torch.zeros_like(x)
    flat_x = x.view(-1)
    flat_g = grad.view(-1)
    with torch.no_grad():
        for i in range(flat_x.numel()):
            orig = flat_x[i].item()
            flat_x[i] = orig + eps
            hi = float(f(x))
            flat_x[i] = orig - eps
            lo = float(f(x))
            flat_x[i] = orig
            flat_g[i] = (hi - lo) / (2 * eps)
    return grad


def analytic_grad(f: Callable[[torch.Tensor], torch.Tensor], x: torch.Tensor) -> torch.Tensor:
    x = x.detach().clone().requires_grad_(True)
    value = f(x)
    (grad,) = torch.autograd.grad(value, x)
    return grad


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    scale = max(float(numeric.abs().max()), 1e-12)
    return float((analytic - numeric).abs().max()) / scale


def check_input_gradient(
    name: str,
    f: Callable[[torch.Tensor], torch.Tensor],
    x: torch.Tensor,
    threshold: float = DEFAULT_THRESHOLD,
    eps: float = DEFAULT_EPS,
    corrupt: bool = False,
) -> CheckResult:
    a = analytic_grad(f, x)
    if corrupt:
        a = a + 0.05 * (a.abs().max() + 1.0)
    n = numeric_grad(f, x, eps)
    return CheckResult(name=name, max_rel_error=relative_error(a, n), threshold=threshold)


def check_parameter_gradient(
    name: str,
    model: torch.nn.Module,
    f: Callable[[], torch.Tensor],
    threshold: float = DEFAULT_THRESHOLD,
    eps: float = DEFAULT_EPS,
    corrupt: bool = False,
) -> CheckResult:
    """Check d f / d theta for every learnable scalar of ``model``."""
    model.zero_grad()
    f().backward()
    worst = 0.0
    with torch.no_grad():
        for param in model.parameters():
            analytic = param.grad.detach().clone().view(-1)
            if corrupt:
                analytic = analytic + 0.05 * (analytic.abs().max() + 1.0)
            flat = param.view(-1)
            numeric = torch.zeros_like(flat)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                hi = float(f())
                flat[i] = orig - eps
                lo = float(f())
                flat[i] = orig
                numeric[i] = (hi - lo) / (2 * eps)
            scale = max(float(numeric.abs().max()), 1e-12)
            worst = max(worst, float((analytic - numeric).abs().max()) / scale)
    model.zero_grad()
    return CheckResult(name=name, max_rel_error=worst, threshold=threshold)


def run_loss_suites(corrupt: str | None = None, seed: int = 0) -> list[CheckResult]:
    """Gradients of every training loss w.r.t. the predicted frame (8x8, float64)."""
    torch.manual_seed(seed)
    shape = (1, 1, 8, 8)
    pred = torch.randn(*shape, dtype=torch.float64) * 0.5
    gt = torch.randn(*shape, dtype=torch.float64) * 0.5
    prev = torch.randn(*shape, dtype=torch.float64) * 0.5

    results = [
        check_input_gradient(
            "intensity", lambda p: intensity_loss(p, gt), pred, corrupt=corrupt == "intensity"
        ),
        check_input_gradient(
            "gradient", lambda p: gradient_loss(p, gt), pred, corrupt=corrupt == "gradient"
        ),
    ]

    estimator = HornSchunckFlow().double()
    with torch.no_grad():
        flow_gt = estimator(gt, prev)
    results.append(
        check_input_gradient(
            "flow",
            lambda p: flow_loss(estimator(p, prev), flow_gt),
            pred,
            corrupt=corrupt == "flow",
        )
    )

    disc = PatchDiscriminator(DiscriminatorConfig(in_channels=1, base_width=4, num_stages=2)).double()
    results.append(
        check_input_gradient(
            "adversarial_d",
            lambda p: adversarial_loss_d(disc(gt), disc(p)),
            pred,
            corrupt=corrupt == "adversarial_d",
        )
    )
    results.append(
        check_input_gradient(
            "adversarial_g",
            lambda p: adversarial_loss_g(disc(p)),
            pred,
            corrupt=corrupt == "adversarial_g",
        )
    )
    return results


def run_generator_parameter_suite(corrupt: str | None = None, seed: int = 0) -> CheckResult:
    """d mean(G(x)) / d theta on a 16x16 miniature generator, float64."""
    torch.manual_seed(seed)
    cfg = GeneratorConfig(input_frames=2, channels_per_frame=1, base_width=2, depth=2)
    gen = UNetGenerator(cfg).double()
    x = torch.randn(1, cfg.in_channels, 16, 16, dtype=torch.float64)
    return check_parameter_gradient(
        "generator_parameters",
        gen,
        lambda: gen(x).mean(),
        corrupt=corrupt == "generator_parameters",
    )


def run_all(corrupt: str | None = None, seed: int = 0) -> list[CheckResult]:
    return run_loss_suites(corrupt=corrupt, seed=seed) + [
        run_generator_parameter_suite(corrupt=corrupt, seed=seed)
    ]
