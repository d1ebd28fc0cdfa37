"""Markovian patch discriminator over (condition, candidate) channel stacks.

Each output logit scores one receptive-field patch of the input rather than
the sequence as a whole, so the adversarial loss acts on local morphology."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import BadLength, ShapeMismatch

DEFAULT_D_WIDTHS = (64, 128, 256, 512)
DEFAULT_D_STRIDES = (2, 2, 2, 1)


@dataclass(frozen=True)
class DiscriminatorSpec:
    in_channels: int = 12       # 3 condition leads stacked with 9 candidate leads
    widths: tuple = DEFAULT_D_WIDTHS
    strides: tuple = DEFAULT_D_STRIDES
    kernel_size: int = 4
    leaky_slope: float = 0.2

    def __post_init__(self):
        if len(self.widths) != len(self.strides):
            raise ShapeMismatch("widths and strides must have equal length")

    def to_dict(self) -> dict:
        return {"in_channels": self.in_channels, "widths": list(self.widths),
                "strides": list(self.strides), "kernel_size": self.kernel_size,
                "leaky_slope": self.leaky_slope}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscriminatorSpec":
        d = dict(d)
        d["widths"] = tuple(d["widths"])
        d["strides"] = tuple(d["strides"])
        return cls(**d)


def _conv_out_len(length: int, kernel: int, stride: int, padding: int = 1) -> int:
    return (length + 2 * padding - kernel) // stride + 1


class PatchDiscriminator1d(nn.Module):
    def __init__(self, spec: DiscriminatorSpec = DiscriminatorSpec()):
        super().__init__()
        self.spec = spec
        layers = []
        prev = spec.in_channels
        for i, (width, stride) in enumerate(zip(spec.widths, spec.strides)):
            norm = i > 0
            layers.append(nn.Conv1d(prev, width, spec.kernel_size, stride=stride,
                                    padding=1, bias=not norm))
            if norm:
                layers.append(nn.BatchNorm1d(width))
            layers.append(nn.LeakyReLU(spec.leaky_slope, inplace=True))
            prev = width
        # 1-channel projection producing one logit per patch
        layers.append(nn.Conv1d(prev, 1, spec.kernel_size, stride=1, padding=1))
        self.layers = nn.Sequential(*layers)

    def logits_length(self, length: int) -> int:
        out = length
        for stride in self.spec.strides:
            out = _conv_out_len(out, self.spec.kernel_size, stride)
        out = _conv_out_len(out, self.spec.kernel_size, 1)
        if out < 1:
            raise BadLength(f"input length {length} too short for any patch logit")
        return out

    def receptive_interval(self, j: int) -> tuple:
        """Closed input-sample interval [lo, hi] that patch logit j can see.

        Walks the conv stack backward: a span [a, b] at one layer's output was
        produced from input samples [a*s - p, b*s - p + k - 1]."""
        lo = hi = j
        kernel = self.spec.kernel_size
        for stride in (1,) + tuple(reversed(self.spec.strides)):
            lo = lo * stride - 1
            hi = hi * stride - 1 + kernel - 1
        return lo, hi

    def forward(self, condition: torch.Tensor, candidate: torch.Tensor) -> torch.Tensor:
        if condition.ndim != 3 or candidate.ndim != 3:
            raise ShapeMismatch("condition and candidate must be (batch, channels, L)")
        if condition.shape[0] != candidate.shape[0] or condition.shape[-1] != candidate.shape[-1]:
            raise ShapeMismatch(
                f"batch/length mismatch: {tuple(condition.shape)} vs {tuple(candidate.shape)}")
        x = torch.cat([condition, candidate], dim=1)
        if x.shape[1] != self.spec.in_channels:
            raise ShapeMismatch(
                f"stacked channels {x.shape[1]} != expected {self.spec.in_channels}")
        self.logits_length(x.shape[-1])   # raises BadLength on degenerate input
        out = self.layers(x)
        return out.squeeze(1)


def patch_majority(logits: torch.Tensor) -> str:
    """Diagnostic vote: "real" iff strictly more than half the patch logits are
    positive; ties count as fake."""
    flat = logits.reshape(-1)
    positive = int((flat > 0).sum().item())
    return "real" if 2 * positive > flat.numel() else "fake"
