"""Versioned checkpoint container.

A checkpoint is a numpy ``.npz`` archive (a zip of ``.npy`` members, readable
from any language with a zip reader and the npy spec):

    meta                          0-d unicode array holding a JSON document:
                                  format_version, step, generator/discriminator
                                  config fields, optimizer param_groups, the
                                  numpy bit-generator state and free-form extra
                                  metadata (train config snapshot, seed).
    generator.<name>              generator tensors by state_dict name
    discriminator.<name>          discriminator tensors by state_dict name
    opt_g.<idx>.<key>             Adam per-parameter state (step/exp_avg/exp_avg_sq)
    opt_d.<idx>.<key>
    rng_torch                     torch CPU RNG state, uint8

Writes are atomic: temp file in the target directory, then rename.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import CheckpointError
from .predictor import DiscriminatorConfig, GeneratorConfig, PatchDiscriminator, UNetGenerator

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    step: int
    gen_config: GeneratorConfig
    disc_config: DiscriminatorConfig
    gen_state: dict
    disc_state: dict
    opt_g_state: dict | None = None
    opt_d_state: dict | None = None
    numpy_rng_state: dict | None = None
    torch_rng_state: torch.Tensor | None = None
    extra: dict = field(default_factory=dict)


def _pack_opt(arrays: dict, prefix: str, state: dict | None) -> list:
    if state is None:
        return []
    for idx, per_param in state["state"].items():
        for key, value in per_param.items():
            tensor = value if torch.is_tensor(value) else torch.tensor(value)
            arrays[f"{prefix}.{idx}.{key}"] = tensor.detach().cpu().numpy()
    return state["param_groups"]


def _unpack_opt(archive, prefix: str, param_groups: list | None) -> dict | None:
    if param_groups is None:
        return None
    state: dict = {}
    skip = len(prefix) + 1
    for name in archive.files:
        if not name.startswith(prefix + "."):
            continue
        idx_str, key = name[skip:].split(".", 1)
        state.setdefault(int(idx_str), {})[key] = torch.from_numpy(archive[name])
    return {"state": state, "param_groups": param_groups}


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: dict = {}
    for name, tensor in ckpt.gen_state.items():
        arrays[f"generator.{name}"] = tensor.detach().cpu().numpy()
    for name, tensor in ckpt.disc_state.items():
        arrays[f"discriminator.{name}"] = tensor.detach().cpu().numpy()
    groups_g = _pack_opt(arrays, "opt_g", ckpt.opt_g_state)
    groups_d = _pack_opt(arrays, "opt_d", ckpt.opt_d_state)
    if ckpt.torch_rng_state is not None:
        arrays["rng_torch"] = ckpt.torch_rng_state.numpy()
    meta = {
        "format_version": FORMAT_VERSION,
        "step": ckpt.step,
        "gen_config": asdict(ckpt.gen_config),
        "disc_config": asdict(ckpt.disc_config),
        "opt_g_param_groups": groups_g if ckpt.opt_g_state is not None else None,
        "opt_d_param_groups": groups_d if ckpt.opt_d_state is not None else None,
        "numpy_rng_state": ckpt.numpy_rng_state,
        "extra": ckpt.extra,
    }
    arrays["meta"] = np.array(json.dumps(meta))
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint {path} does not exist")
    with np.load(path) as archive:
        try:
            meta = json.loads(str(archive["meta"]))
        except (KeyError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path} is not a valid checkpoint: {exc}") from exc
        if meta.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format {meta.get('format_version')}")
        gen_state, disc_state = {}, {}
        for name in archive.files:
            if name.startswith("generator."):
                gen_state[name[len("generator.") :]] = torch.from_numpy(archive[name])
            elif name.startswith("discriminator."):
                disc_state[name[len("discriminator.") :]] = torch.from_numpy(archive[name])
        opt_g = _unpack_opt(archive, "opt_g", meta["opt_g_param_groups"])
        opt_d = _unpack_opt(archive, "opt_d", meta["opt_d_param_groups"])
        torch_rng = torch.from_numpy(archive["rng_torch"]) if "rng_torch" in archive.files else None
    return Checkpoint(
        step=meta["step"],
        gen_config=GeneratorConfig(**meta["gen_config"]),
        disc_config=DiscriminatorConfig(**meta["disc_config"]),
        gen_state=gen_state,
        disc_state=disc_state,
        opt_g_state=opt_g,
        opt_d_state=opt_d,
        numpy_rng_state=meta["numpy_rng_state"],
        torch_rng_state=torch_rng,
        extra=meta.get("extra", {}),
    )


def load_generator(path: str | Path) -> tuple[UNetGenerator, Checkpoint]:
    """Rebuild the generator of a checkpoint for inference."""
    ckpt = load_checkpoint(path)
    gen = UNetGenerator(ckpt.gen_config)
    gen.load_state_dict(ckpt.gen_state)
    gen.eval()
    return gen, ckpt


def load_discriminator(path: str | Path) -> PatchDiscriminator:
    ckpt = load_checkpoint(path)
    disc = PatchDiscriminator(ckpt.disc_config)
    disc.load_state_dict(ckpt.disc_state)
    disc.eval()
    return disc


def checkpoint_id(path: str | Path) -> str:
    """Stable content hash used in reports and manifests."""
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return digest[:16]
