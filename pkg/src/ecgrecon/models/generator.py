"""1D UNet generator: 7 strided conv blocks down, 7 transpose-conv blocks up,
depth-matched skip concatenation, tanh output."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import BadLength

DEFAULT_WIDTHS = (64, 128, 256, 512, 1024, 1024, 1024)


@dataclass(frozen=True)
class GeneratorSpec:
    in_channels: int = 3
    out_channels: int = 9
    widths: tuple = DEFAULT_WIDTHS
    kernel_size: int = 4
    stride: int = 2
    leaky_slope: float = 0.2
    dropout: float = 0.5
    dropout_blocks: int = 3     # innermost decoder blocks with dropout
    bn_everywhere: bool = False

    @property
    def n_blocks(self) -> int:
        return len(self.widths)

    @property
    def downsample_factor(self) -> int:
        return self.stride ** self.n_blocks

    def to_dict(self) -> dict:
        return {"in_channels": self.in_channels, "out_channels": self.out_channels,
                "widths": list(self.widths), "kernel_size": self.kernel_size,
                "stride": self.stride, "leaky_slope": self.leaky_slope,
                "dropout": self.dropout, "dropout_blocks": self.dropout_blocks,
                "bn_everywhere": self.bn_everywhere}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        d = dict(d)
        d["widths"] = tuple(d["widths"])
        return cls(**d)


class _DownBlock(nn.Module):
    def __init__(self, in_ch, out_ch, spec: GeneratorSpec, norm: bool):
        super().__init__()
        layers = [nn.Conv1d(in_ch, out_ch, spec.kernel_size, stride=spec.stride,
                            padding=1, bias=not norm)]
        if norm:
            layers.append(nn.BatchNorm1d(out_ch))
        layers.append(nn.LeakyReLU(spec.leaky_slope, inplace=True))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class _UpBlock(nn.Module):
    def __init__(self, in_ch, out_ch, spec: GeneratorSpec, norm: bool,
                 dropout: bool, final: bool):
        super().__init__()
        layers = [nn.ConvTranspose1d(in_ch, out_ch, spec.kernel_size,
                                     stride=spec.stride, padding=1, bias=not norm)]
        if norm:
            layers.append(nn.BatchNorm1d(out_ch))
        if final:
            layers.append(nn.Tanh())
        else:
            layers.append(nn.ReLU(inplace=True))
            if dropout:
                layers.append(nn.Dropout(spec.dropout))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class UnetGenerator1d(nn.Module):
    """Maps (B, in_channels, L) -> (B, out_channels, L); L must be a multiple
    of 2**n_blocks. An optional module can be spliced in at the bottleneck
    (used by the LSTM-UNet variant)."""

    def __init__(self, spec: GeneratorSpec = GeneratorSpec(),
                 bottleneck: nn.Module | None = None):
        super().__init__()
        self.spec = spec
        self.bottleneck = bottleneck

        downs = []
        prev = spec.in_channels
        for i, width in enumerate(spec.widths):
            # first block skips normalization unless explicitly requested
            norm = spec.bn_everywhere or i > 0
            downs.append(_DownBlock(prev, width, spec, norm=norm))
            prev = width
        self.downs = nn.ModuleList(downs)

        ups = []
        skip_widths = list(reversed(spec.widths[:-1]))   # skip partners, inner to outer
        out_widths = skip_widths + [spec.out_channels]
        in_ch = spec.widths[-1]
        for j, out_ch in enumerate(out_widths):
            final = j == len(out_widths) - 1
            ups.append(_UpBlock(in_ch, out_ch, spec, norm=not final,
                                dropout=j < spec.dropout_blocks, final=final))
            if not final:
                in_ch = out_ch + skip_widths[j]
        self.ups = nn.ModuleList(ups)

    def check_length(self, length: int):
        factor = self.spec.downsample_factor
        if length < factor or length % factor != 0:
            raise BadLength(
                f"input length {length} must be a positive multiple of {factor}")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 3 or x.shape[1] != self.spec.in_channels:
            raise BadLength(
                f"expected (batch, {self.spec.in_channels}, L) input, got {tuple(x.shape)}")
        length = x.shape[-1]
        self.check_length(length)

        skips = []
        h = x
        for i, down in enumerate(self.downs):
            h = down(h)
            assert h.shape[-1] == length >> (i + 1)   # strict halving at every depth
            skips.append(h)

        if self.bottleneck is not None:
            h = self.bottleneck(h)

        for j, up in enumerate(self.ups):
            h = up(h)
            if j < len(self.ups) - 1:
                h = torch.cat([h, skips[-(j + 2)]], dim=1)
        return h
