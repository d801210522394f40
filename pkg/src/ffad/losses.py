"""Training objectives: intensity, gradient, flow and least-squares adversarial.

Every loss is normalized by its element (or valid-term) count, so magnitudes
are resolution-invariant and the default weights stay meaningful at desk
scale. All functions are pure and differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import NegativeWeightError, ShapeMismatchError, TooSmallError


@dataclass(frozen=True)
class LossWeights:
    intensity: float = 1.0
    gradient: float = 1.0
    flow: float = 2.0
    adversarial: float = 0.05

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise NegativeWeightError(f"{name} weight must be >= 0, got {value}")


@dataclass
class LossBreakdown:
    """Per-step scalar record; total_g is the weighted generator objective."""

    intensity: float = 0.0
    gradient: float = 0.0
    flow: float = 0.0
    adv_g: float = 0.0
    total_g: float = 0.0
    d: float = 0.0

    LOG_FIELDS = ("intensity", "gradient", "flow", "adv_g", "total_g", "d")

    def as_log_values(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in self.LOG_FIELDS)


def _check_same_shape(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def intensity_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean squared intensity difference."""
    _check_same_shape(pred, gt)
    return torch.mean((pred - gt) ** 2)


def gradient_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference of absolute spatial gradients.

    Expects (..., H, W); vertical differences are valid for i >= 1 and
    horizontal for j >= 1, and the mean runs over the union of both term
    sets, so a 2x2 image contributes 2 + 2 terms.
    """
    _check_same_shape(pred, gt)
    if pred.shape[-2] < 2 or pred.shape[-1] < 2:
        raise TooSmallError(f"need H, W >= 2, got {tuple(pred.shape[-2:])}")
    pred_dy = (pred[..., 1:, :] - pred[..., :-1, :]).abs()
    gt_dy = (gt[..., 1:, :] - gt[..., :-1, :]).abs()
    pred_dx = (pred[..., :, 1:] - pred[..., :, :-1]).abs()
    gt_dx = (gt[..., :, 1:] - gt[..., :, :-1]).abs()
    total = (pred_dy - gt_dy).abs().sum() + (pred_dx - gt_dx).abs().sum()
    return total / (pred_dy.numel() + pred_dx.numel())


def flow_loss(flow_pred: torch.Tensor, flow_gt: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between the two flow fields."""
    _check_same_shape(flow_pred, flow_gt)
    return torch.mean((flow_pred - flow_gt).abs())


def adversarial_loss_d(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """Least-squares discriminator loss: real toward 1, fake toward 0."""
    _check_same_shape(real_scores, fake_scores)
    return torch.mean((real_scores - 1.0) ** 2 / 2.0) + torch.mean(fake_scores**2 / 2.0)


def adversarial_loss_g(fake_scores: torch.Tensor) -> torch.Tensor:
    """Least-squares generator loss: fake scores pushed toward 1."""
    return torch.mean((fake_scores - 1.0) ** 2 / 2.0)


def generator_objective(
    weights: LossWeights,
    intensity: torch.Tensor | None = None,
    gradient: torch.Tensor | None = None,
    flow: torch.Tensor | None = None,
    adversarial: torch.Tensor | None = None,
) -> torch.Tensor:
    """Weighted sum of the supplied component losses.

    A weight of exactly 0 disables its term (the term is skipped, not
    multiplied), which is the ablation switch; disabled terms may be passed
    as None.
    """
    terms = []
    for weight, value, name in (
        (weights.intensity, intensity, "intensity"),
        (weights.gradient, gradient, "gradient"),
        (weights.flow, flow, "flow"),
        (weights.adversarial, adversarial, "adversarial"),
    ):
        if weight == 0.0:
            continue
        if value is None:
            raise ValueError(f"{name} weight is {weight} but no {name} loss was supplied")
        terms.append(weight * value)
    if not terms:
        return torch.tensor(0.0)
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return total


def discriminator_objective(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """Alias of :func:`adversarial_loss_d`; the trainer's second objective."""
    return adversarial_loss_d(real_scores, fake_scores)
