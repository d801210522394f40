"""Alternating adversarial training of the future-frame generator.

Each step updates the discriminator first (generator frozen), then the
generator (discriminator frozen), both with Adam. The optical-flow estimator
never receives gradients or updates. Training is resumable: checkpoints carry
model parameters, optimizer moments and both RNG states, so save -> load ->
continue is step-for-step identical to an uninterrupted run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from . import checkpoint as ckpt_io
from .errors import ConfigError, EmptyDatasetError, NonFiniteLossError, TooShortError
from .flow import FlowEstimatorSpec, build_estimator
from .frames_io import Clip, FrameSequence, sample_clip
from .losses import (
    LossBreakdown,
    LossWeights,
    adversarial_loss_d,
    adversarial_loss_g,
    generator_objective,
    gradient_loss,
    intensity_loss,
    flow_loss,
)
from .predictor import (
    DiscriminatorConfig,
    GeneratorConfig,
    build_models,
    frames_to_input,
)

GRAY_LR_G, GRAY_LR_D = 1e-4, 1e-5
COLOR_LR_G, COLOR_LR_D = 2e-4, 2e-5

LOG_HEADER = "step," + ",".join(LossBreakdown.LOG_FIELDS)


@dataclass(frozen=True)
class TrainConfig:
    t: int = 4
    batch: int = 4
    lr_g: float | None = None  # None: pick gray/color default by channel count
    lr_d: float | None = None
    weights: LossWeights = field(default_factory=LossWeights)
    max_steps: int = 3000
    seed: int = 0
    flow_spec: FlowEstimatorSpec = field(default_factory=FlowEstimatorSpec)
    checkpoint_every: int = 1000
    base_width: int = 64
    depth: int = 4
    disc_base_width: int = 64
    disc_stages: int = 4
    lr_decay_steps: int = 0  # 0 disables step decay
    lr_decay_gamma: float = 0.5
    threads: int | None = None
    resize_target: int = 256
    color_mode: str = "auto"

    def __post_init__(self):
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if self.t < 1:
            raise ConfigError("t must be >= 1")
        for name in ("lr_g", "lr_d"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ConfigError(f"{name} must be > 0")

    def learning_rates(self, channels: int) -> tuple[float, float]:
        if channels == 1:
            lr_g, lr_d = GRAY_LR_G, GRAY_LR_D
        else:
            lr_g, lr_d = COLOR_LR_G, COLOR_LR_D
        return (self.lr_g or lr_g, self.lr_d or lr_d)

    def describe_motion_constraint(self) -> str:
        return "with motion constraint" if self.weights.flow > 0 else "without motion constraint"


_FLAT_WEIGHT_KEYS = {
    "weight_intensity": "intensity",
    "weight_gradient": "gradient",
    "weight_flow": "flow",
    "weight_adversarial": "adversarial",
}
_FLAT_FLOW_KEYS = {
    "flow_kind": ("kind", str),
    "flow_iterations": ("iterations", int),
    "flow_smoothness": ("smoothness", float),
    "flow_weights_path": ("weights_path", str),
}


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key=value`` config file ('#' starts a comment)."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def train_config_from_mapping(mapping: dict[str, str], base: TrainConfig | None = None) -> TrainConfig:
    """Override TrainConfig fields from string key/values; unknown keys fail."""
    cfg = base or TrainConfig()
    simple = {
        f.name: f
        for f in dataclasses.fields(TrainConfig)
        if f.name not in ("weights", "flow_spec")
    }
    updates: dict = {}
    weights = dict(dataclasses.asdict(cfg.weights))
    flow_kw = dict(dataclasses.asdict(cfg.flow_spec))
    for key, value in mapping.items():
        if key in _FLAT_WEIGHT_KEYS:
            weights[_FLAT_WEIGHT_KEYS[key]] = float(value)
        elif key in _FLAT_FLOW_KEYS:
            name, cast = _FLAT_FLOW_KEYS[key]
            flow_kw[name] = cast(value)
        elif key in simple:
            updates[key] = _parse_scalar(value, simple[key])
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return replace(
        cfg,
        weights=LossWeights(**weights),
        flow_spec=FlowEstimatorSpec(**flow_kw),
        **updates,
    )


def _parse_scalar(value: str, f: dataclasses.Field):
    text = value.strip()
    if text.lower() in ("none", ""):
        return None
    if f.type in ("int", "int | None"):
        return int(text)
    if f.type in ("float", "float | None"):
        return float(text)
    return text


@dataclass
class TrainState:
    step: int
    gen: torch.nn.Module
    disc: torch.nn.Module
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    flow_estimator: torch.nn.Module
    rng: np.random.Generator
    gen_config: GeneratorConfig
    disc_config: DiscriminatorConfig
    base_lr: tuple[float, float]
    phase_hook: Callable[[str], None] | None = None


def init_state(cfg: TrainConfig, channels: int, dtype: torch.dtype = torch.float32) -> TrainState:
    if cfg.threads is not None:
        torch.set_num_threads(cfg.threads)
    gen_cfg = GeneratorConfig(
        input_frames=cfg.t,
        channels_per_frame=channels,
        base_width=cfg.base_width,
        depth=cfg.depth,
    )
    disc_cfg = DiscriminatorConfig(
        in_channels=channels,
        base_width=cfg.disc_base_width,
        num_stages=cfg.disc_stages,
    )
    gen, disc = build_models(gen_cfg, disc_cfg, cfg.seed, dtype)
    lr_g, lr_d = cfg.learning_rates(channels)
    opt_g = torch.optim.Adam(gen.parameters(), lr=lr_g, betas=(0.9, 0.999), eps=1e-8)
    opt_d = torch.optim.Adam(disc.parameters(), lr=lr_d, betas=(0.9, 0.999), eps=1e-8)
    flow_estimator = build_estimator(cfg.flow_spec).to(dtype)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    return TrainState(
        step=0,
        gen=gen,
        disc=disc,
        opt_g=opt_g,
        opt_d=opt_d,
        flow_estimator=flow_estimator,
        rng=rng,
        gen_config=gen_cfg,
        disc_config=disc_cfg,
        base_lr=(lr_g, lr_d),
    )


def _apply_lr_schedule(state: TrainState, cfg: TrainConfig) -> None:
    if cfg.lr_decay_steps <= 0:
        return
    factor = cfg.lr_decay_gamma ** (state.step // cfg.lr_decay_steps)
    for opt, base in zip((state.opt_g, state.opt_d), state.base_lr):
        for group in opt.param_groups:
            group["lr"] = base * factor


def _clips_to_tensors(batch: Sequence[Clip], t: int, dtype: torch.dtype) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Returns (history (B, t*C, H, W), previous frame, target frame)."""
    for clip in batch:
        if clip.frames.shape[0] != t + 1:
            raise TooShortError(f"clip has {clip.frames.shape[0]} frames, expected {t + 1}")
    stack = np.stack([c.frames for c in batch])  # (B, t+1, H, W, C)
    history = frames_to_input(stack[:, :t], dtype)
    to_chw = lambda arr: torch.from_numpy(np.ascontiguousarray(arr)).to(dtype).permute(0, 3, 1, 2)
    previous = to_chw(stack[:, t - 1])
    target = to_chw(stack[:, t])
    return history, previous, target


def train_step(state: TrainState, batch: Sequence[Clip], cfg: TrainConfig) -> LossBreakdown:
    """One D-then-G update on a batch of clips."""
    dtype = next(state.gen.parameters()).dtype
    history, previous, target = _clips_to_tensors(batch, cfg.t, dtype)
    weights = cfg.weights
    breakdown = LossBreakdown()
    _apply_lr_schedule(state, cfg)

    adversarial_on = weights.adversarial > 0
    if adversarial_on:
        if state.phase_hook:
            state.phase_hook("d_update")
        with torch.no_grad():
            fake_detached = state.gen(history)
        d_loss = adversarial_loss_d(state.disc(target), state.disc(fake_detached))
        _require_finite("d", d_loss, breakdown)
        state.opt_d.zero_grad()
        d_loss.backward()
        state.opt_d.step()
        breakdown.d = float(d_loss.detach())

    if state.phase_hook:
        state.phase_hook("g_update")
    disc_params = list(state.disc.parameters())
    for p in disc_params:
        p.requires_grad_(False)
    try:
        fake = state.gen(history)
        components: dict[str, torch.Tensor | None] = {
            "intensity": None,
            "gradient": None,
            "flow": None,
            "adversarial": None,
        }
        if weights.intensity > 0:
            components["intensity"] = intensity_loss(fake, target)
            breakdown.intensity = float(components["intensity"].detach())
        if weights.gradient > 0:
            components["gradient"] = gradient_loss(fake, target)
            breakdown.gradient = float(components["gradient"].detach())
        if weights.flow > 0:
            flow_pred = state.flow_estimator(fake, previous)
            with torch.no_grad():
                flow_gt = state.flow_estimator(target, previous)
            components["flow"] = flow_loss(flow_pred, flow_gt)
            breakdown.flow = float(components["flow"].detach())
        if adversarial_on:
            components["adversarial"] = adversarial_loss_g(state.disc(fake))
            breakdown.adv_g = float(components["adversarial"].detach())
        g_loss = generator_objective(weights, **components)
        _require_finite("total_g", g_loss, breakdown)
        state.opt_g.zero_grad()
        g_loss.backward()
        state.opt_g.step()
        breakdown.total_g = float(g_loss.detach())
    finally:
        for p in disc_params:
            p.requires_grad_(True)

    state.step += 1
    return breakdown


def _require_finite(name: str, value: torch.Tensor, breakdown: LossBreakdown) -> None:
    if not torch.isfinite(value):
        raise NonFiniteLossError(f"non-finite {name} loss at breakdown {breakdown}")


def sample_batch(dataset: Sequence[FrameSequence], state: TrainState, cfg: TrainConfig) -> list[Clip]:
    """Clips drawn uniformly over all valid (video, start) positions."""
    counts = np.array([max(len(seq) - cfg.t, 0) for seq in dataset], dtype=np.float64)
    if counts.sum() == 0:
        raise EmptyDatasetError(f"no video long enough for clips of length {cfg.t + 1}")
    probs = counts / counts.sum()
    batch = []
    for _ in range(cfg.batch):
        vid = int(state.rng.choice(len(dataset), p=probs))
        batch.append(sample_clip(dataset[vid], state.rng, cfg.t))
    return batch


def save_train_checkpoint(path: str | Path, state: TrainState, cfg: TrainConfig) -> None:
    ckpt = ckpt_io.Checkpoint(
        step=state.step,
        gen_config=state.gen_config,
        disc_config=state.disc_config,
        gen_state=state.gen.state_dict(),
        disc_state=state.disc.state_dict(),
        opt_g_state=state.opt_g.state_dict(),
        opt_d_state=state.opt_d.state_dict(),
        numpy_rng_state=state.rng.bit_generator.state,
        torch_rng_state=torch.get_rng_state(),
        extra={"train_config": _config_snapshot(cfg)},
    )
    ckpt_io.save_checkpoint(path, ckpt)


def _config_snapshot(cfg: TrainConfig) -> dict:
    snap = dataclasses.asdict(cfg)
    return snap


def resume_state(path: str | Path, cfg: TrainConfig, dtype: torch.dtype = torch.float32) -> TrainState:
    """Rebuild a TrainState from a checkpoint; continues bit-exactly."""
    ckpt = ckpt_io.load_checkpoint(path)
    state = init_state(cfg, ckpt.gen_config.channels_per_frame, dtype)
    if ckpt.gen_config != state.gen_config or ckpt.disc_config != state.disc_config:
        raise ConfigError(
            f"checkpoint model config {ckpt.gen_config}/{ckpt.disc_config} does not match "
            f"training config {state.gen_config}/{state.disc_config}"
        )
    state.gen.load_state_dict(ckpt.gen_state)
    state.disc.load_state_dict(ckpt.disc_state)
    if ckpt.opt_g_state is not None:
        state.opt_g.load_state_dict(ckpt.opt_g_state)
    if ckpt.opt_d_state is not None:
        state.opt_d.load_state_dict(ckpt.opt_d_state)
    if ckpt.numpy_rng_state is not None:
        state.rng.bit_generator.state = ckpt.numpy_rng_state
    if ckpt.torch_rng_state is not None:
        torch.set_rng_state(ckpt.torch_rng_state)
    state.step = ckpt.step
    return state


def train(
    cfg: TrainConfig,
    dataset: Sequence[FrameSequence],
    out_dir: str | Path,
    resume: str | Path | None = None,
    log_every: int = 1,
) -> Path:
    """Run the training loop; returns the final checkpoint path."""
    if not dataset:
        raise EmptyDatasetError("dataset is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    channels = dataset[0].frames.shape[-1]
    if resume is not None:
        state = resume_state(resume, cfg)
    else:
        state = init_state(cfg, channels)
    log_path = out_dir / "train_log.csv"
    mode = "a" if resume is not None and log_path.exists() else "w"
    final_path = out_dir / "checkpoint_final.npz"
    with open(log_path, mode) as log:
        if mode == "w":
            log.write(LOG_HEADER + "\n")
        while state.step < cfg.max_steps:
            batch = sample_batch(dataset, state, cfg)
            breakdown = train_step(state, batch, cfg)
            if state.step % log_every == 0 or state.step == cfg.max_steps:
                values = ",".join(f"{v:.6g}" for v in breakdown.as_log_values())
                log.write(f"{state.step},{values}\n")
            if cfg.checkpoint_every > 0 and state.step % cfg.checkpoint_every == 0:
                save_train_checkpoint(out_dir / f"checkpoint_{state.step:07d}.npz", state, cfg)
    save_train_checkpoint(final_path, state, cfg)
    return final_path
