"""Recurrent reconstruction baselines."""

from __future__ import annotations

import torch
from torch import nn

from .generator import GeneratorSpec, UnetGenerator1d


class LstmReconstructor(nn.Module):
    """Plain sequence-to-sequence baseline: stacked LSTM over the 3 input
    leads, pointwise linear head to the 9 target leads. Accepts any length."""

    def __init__(self, in_channels: int = 3, out_channels: int = 9,
                 hidden_size: int = 64, num_layers: int = 2):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.lstm = nn.LSTM(in_channels, hidden_size, num_layers, batch_first=True)
        self.head = nn.Linear(hidden_size, out_channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # (B, C, L) -> (B, L, C) for the recurrence, back after the head
        h, _ = self.lstm(x.transpose(1, 2))
        return self.head(h).transpose(1, 2)


class BiLstmBottleneck(nn.Module):
    """Bidirectional LSTM spliced into the UNet bottleneck; projects the
    concatenated directions back to the encoder channel width."""

    def __init__(self, channels: int, hidden_size: int = 512, num_layers: int = 1):
        super().__init__()
        self.lstm = nn.LSTM(channels, hidden_size, num_layers,
                            batch_first=True, bidirectional=True)
        self.proj = nn.Linear(2 * hidden_size, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, _ = self.lstm(x.transpose(1, 2))
        return self.proj(h).transpose(1, 2)


def build_lstm_unet(spec: GeneratorSpec, hidden_size: int = 512) -> UnetGenerator1d:
    """UNet with a recurrent bottleneck and no adversary (trained with MSE)."""
    return UnetGenerator1d(spec, bottleneck=BiLstmBottleneck(spec.widths[-1], hidden_size))
