"""Model zoo: GAN generator/discriminator pair, LSTM-UNet, and LSTM baseline,
plus checkpoint save/load helpers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..errors import ConfigHashMismatch
from .discriminator import (DEFAULT_D_STRIDES, DEFAULT_D_WIDTHS, DiscriminatorSpec,
                            PatchDiscriminator1d, patch_majority)
from .generator import DEFAULT_WIDTHS, GeneratorSpec, UnetGenerator1d
from .recurrent import BiLstmBottleneck, LstmReconstructor, build_lstm_unet

__all__ = [
    "ModelFamily", "ModelSpec", "GeneratorSpec", "DiscriminatorSpec",
    "UnetGenerator1d", "PatchDiscriminator1d", "LstmReconstructor",
    "BiLstmBottleneck", "build_lstm_unet", "build_reconstructor",
    "build_discriminator", "count_parameters", "as_model_fn",
    "save_checkpoint", "load_checkpoint", "Checkpoint", "patch_majority",
    "DEFAULT_WIDTHS", "DEFAULT_D_WIDTHS", "DEFAULT_D_STRIDES",
]


class ModelFamily(str, enum.Enum):
    GAN = "gan"
    LSTM_UNET = "lstm-unet"
    LSTM = "lstm"


@dataclass(frozen=True)
class ModelSpec:
    family: ModelFamily = ModelFamily.GAN
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    discriminator: DiscriminatorSpec = field(default_factory=DiscriminatorSpec)
    lstm_hidden: int = 64
    lstm_layers: int = 2
    bottleneck_hidden: int = 512

    def to_dict(self) -> dict:
        return {"family": self.family.value,
                "generator": self.generator.to_dict(),
                "discriminator": self.discriminator.to_dict(),
                "lstm_hidden": self.lstm_hidden,
                "lstm_layers": self.lstm_layers,
                "bottleneck_hidden": self.bottleneck_hidden}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(family=ModelFamily(d["family"]),
                   generator=GeneratorSpec.from_dict(d["generator"]),
                   discriminator=DiscriminatorSpec.from_dict(d["discriminator"]),
                   lstm_hidden=d.get("lstm_hidden", 64),
                   lstm_layers=d.get("lstm_layers", 2),
                   bottleneck_hidden=d.get("bottleneck_hidden", 512))

    def parameter_count(self) -> int:
        """Trainable parameter total for the family (generator + discriminator
        for the adversarial pair)."""
        total = count_parameters(build_reconstructor(self))
        if self.family is ModelFamily.GAN:
            total += count_parameters(build_discriminator(self))
        return total


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


def build_reconstructor(spec: ModelSpec) -> nn.Module:
    """The 3-lead -> 9-lead network for any family (the generator, for the GAN)."""
    if spec.family is ModelFamily.GAN:
        return UnetGenerator1d(spec.generator)
    if spec.family is ModelFamily.LSTM_UNET:
        return build_lstm_unet(spec.generator, spec.bottleneck_hidden)
    if spec.family is ModelFamily.LSTM:
        return LstmReconstructor(spec.generator.in_channels,
                                 spec.generator.out_channels,
                                 spec.lstm_hidden, spec.lstm_layers)
    raise ValueError(f"unknown model family {spec.family!r}")


def build_discriminator(spec: ModelSpec) -> PatchDiscriminator1d:
    return PatchDiscriminator1d(spec.discriminator)


def as_model_fn(module: nn.Module, batch_size: int = 8):
    """Wrap a torch module as a numpy (3, L) -> (9, L) callable for evaluation."""
    def model_fn(inputs: np.ndarray) -> np.ndarray:
        module.eval()
        x = torch.from_numpy(np.ascontiguousarray(inputs, dtype=np.float32))
        squeeze = x.ndim == 2
        if squeeze:
            x = x.unsqueeze(0)
        outs = []
        with torch.no_grad():
            for i in range(0, x.shape[0], batch_size):
                outs.append(module(x[i:i + batch_size]))
        y = torch.cat(outs, dim=0).numpy()
        return y[0] if squeeze else y
    return model_fn


@dataclass
class Checkpoint:
    model_spec: ModelSpec
    state_dict: dict
    discriminator_state: dict | None
    preprocess_config: dict
    preprocess_hash: str
    epoch: int
    step: int
    val_r2: float

    def build(self) -> nn.Module:
        model = build_reconstructor(self.model_spec)
        model.load_state_dict(self.state_dict)
        model.eval()
        return model


def save_checkpoint(path, *, model_spec: ModelSpec, model: nn.Module,
                    discriminator: nn.Module | None = None,
                    preprocess_config: dict, preprocess_hash: str,
                    epoch: int, step: int, val_r2: float) -> None:
    payload = {
        "model_spec": model_spec.to_dict(),
        "state_dict": {k: v.detach().cpu() for k, v in model.state_dict().items()},
        "discriminator_state": (
            {k: v.detach().cpu() for k, v in discriminator.state_dict().items()}
            if discriminator is not None else None),
        "preprocess_config": dict(preprocess_config),
        "preprocess_hash": preprocess_hash,
        "epoch": int(epoch),
        "step": int(step),
        "val_r2": float(val_r2),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path, *, expect_preprocess_hash: str | None = None) -> Checkpoint:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    ckpt = Checkpoint(
        model_spec=ModelSpec.from_dict(payload["model_spec"]),
        state_dict=payload["state_dict"],
        discriminator_state=payload.get("discriminator_state"),
        preprocess_config=payload["preprocess_config"],
        preprocess_hash=payload["preprocess_hash"],
        epoch=payload["epoch"],
        step=payload["step"],
        val_r2=payload["val_r2"],
    )
    if (expect_preprocess_hash is not None
            and ckpt.preprocess_hash != expect_preprocess_hash):
        raise ConfigHashMismatch(
            f"checkpoint preprocessing hash {ckpt.preprocess_hash} does not match "
            f"requested configuration hash {expect_preprocess_hash}")
    return ckpt
