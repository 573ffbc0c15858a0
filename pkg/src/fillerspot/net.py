"""The detection network: 2-D residual encoder, 1-D trunk, per-frame heads.

The encoder halves the frequency axis in the stem and then halves both axes
once per stage until the configured temporal downsample factor is reached.
Frequency is collapsed by mean pooling, a 1-D residual trunk refines the
temporal features, and three small heads emit the category heatmap, word
length (seconds), and sub-frame offset. The trunk output doubles as the
embedding tap for analysis exports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .config import ModelConfig
from .features import Spectrogram

HEATMAP_EPS = 1e-7

#: initial head confidence on the main (filler, non-filler) channels
MAIN_PRIOR = 0.1
#: initial head confidence on auxiliary placeholder channels: near-silent
AUX_PRIOR = 0.01


class NetError(ValueError):
    """Raised for invalid model configuration or malformed inputs."""


@dataclass(frozen=True)
class Prediction:
    """Per-frame model outputs for one clip, on the downsampled time axis."""

    heatmap: np.ndarray
    length: np.ndarray
    offset: np.ndarray
    downsample_factor: int
    embeddings: np.ndarray | None = None

    def __post_init__(self) -> None:
        t, _ = self.heatmap.shape
        if self.length.shape != (t,) or self.offset.shape != (t,):
            raise NetError("length and offset must match the heatmap frame count")

    @property
    def num_frames(self) -> int:
        return self.heatmap.shape[0]

    @property
    def num_channels(self) -> int:
        return self.heatmap.shape[1]


class _Block2d(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, stride: tuple[int, int]):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        self.skip = nn.Sequential()
        if stride != (1, 1) or in_channels != out_channels:
            self.skip = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        self.act = nn.ReLU(inplace=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.act(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.act(out + self.skip(x))


class _Block1d(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv1d(channels, channels, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm1d(channels)
        self.conv2 = nn.Conv1d(channels, channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm1d(channels)
        self.act = nn.ReLU(inplace=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.act(self.bn1(self.conv1(x)))
        return self.act(self.bn2(self.conv2(out)) + x)


def _head(in_channels: int, hidden: int, out_channels: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv1d(in_channels, hidden, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv1d(hidden, out_channels, 1),
    )


class FillerNet(nn.Module):
    """Residual spectrogram encoder with heatmap, length, and offset heads."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        base = config.base_channels
        self.stem = nn.Sequential(
            nn.Conv2d(1, base, 3, stride=(1, 2), padding=1, bias=False),
            nn.BatchNorm2d(base),
            nn.ReLU(inplace=True),
        )
        stages = []
        channels = base
        for _ in range(int(math.log2(config.downsample_factor))):
            stages.append(_Block2d(channels, channels * 2, stride=(2, 2)))
            channels *= 2
        self.stages = nn.Sequential(*stages)
        self.proj = nn.Sequential(
            nn.Conv1d(channels, config.trunk_width, 1, bias=False),
            nn.BatchNorm1d(config.trunk_width),
            nn.ReLU(inplace=True),
        )
        self.trunk = nn.Sequential(*[_Block1d(config.trunk_width) for _ in range(config.trunk_blocks)])
        self.heatmap_head = _head(config.trunk_width, config.head_channels, config.num_channels)
        self.length_head = _head(config.trunk_width, config.head_channels, 1)
        self.offset_head = _head(config.trunk_width, config.head_channels, 1)
        self._init_head_biases()

    def _init_head_biases(self) -> None:
        def logit(p: float) -> float:
            return math.log(p / (1.0 - p))

        bias = self.heatmap_head[-1].bias
        with torch.no_grad():
            bias[:2].fill_(logit(MAIN_PRIOR))
            if self.config.num_auxiliary > 0:
                bias[2:].fill_(logit(AUX_PRIOR))

    @property
    def embedding_dim(self) -> int:
        return self.config.trunk_width

    def forward(
        self, frames: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """Map a (B, T, F) feature batch to per-frame outputs.

        Returns (heatmap, length, offset, embeddings) with shapes
        (B, T', C), (B, T'), (B, T'), (B, T', D) where T' = ceil(T / ds).
        """
        if frames.ndim != 3:
            raise NetError(f"expected a (batch, frames, bins) tensor, got shape {tuple(frames.shape)}")
        x = frames.unsqueeze(1)
        x = self.stem(x)
        x = self.stages(x)
        x = x.mean(dim=3)
        x = self.proj(x)
        emb = self.trunk(x)
        heatmap = torch.sigmoid(self.heatmap_head(emb)).clamp(HEATMAP_EPS, 1.0 - HEATMAP_EPS)
        length = nn.functional.softplus(self.length_head(emb).squeeze(1))
        offset = torch.sigmoid(self.offset_head(emb).squeeze(1)).clamp(0.0, 1.0 - 1e-6)
        return heatmap.transpose(1, 2), length, offset, emb.transpose(1, 2)


def build_model(config: ModelConfig) -> FillerNet:
    """Construct the network; fails fast on an unbuildable configuration."""
    try:
        return FillerNet(config)
    except (ValueError, RuntimeError) as exc:
        raise NetError(f"cannot build model from {config}: {exc}") from exc


def num_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def receptive_field_frames(config: ModelConfig) -> int:
    """Receptive field of one output frame, in input frames.

    Walks the temporal kernel/stride ladder of the actual architecture:
    rf grows by (kernel - 1) * jump per conv, jump grows by the stride.
    """
    layers: list[tuple[int, int]] = [(3, 1)]
    for _ in range(int(math.log2(config.downsample_factor))):
        layers += [(3, 2), (3, 1)]
    layers += [(1, 1)]
    layers += [(3, 1), (3, 1)] * config.trunk_blocks
    layers += [(3, 1), (1, 1)]
    rf, jump = 1, 1
    for kernel, stride in layers:
        rf += (kernel - 1) * jump
        jump *= stride
    return rf


def output_frames(num_input_frames: int, config: ModelConfig) -> int:
    return math.ceil(num_input_frames / config.downsample_factor)


def predict(
    model: FillerNet, spectrogram: Spectrogram, include_embeddings: bool = False
) -> Prediction:
    """Run one clip through the model in evaluation mode."""
    model.eval()
    with torch.no_grad():
        frames = torch.as_tensor(spectrogram.frames, dtype=torch.float32).unsqueeze(0)
        heatmap, length, offset, emb = model(frames)
    return Prediction(
        heatmap=heatmap[0].numpy(),
        length=length[0].numpy(),
        offset=offset[0].numpy(),
        downsample_factor=model.config.downsample_factor,
        embeddings=emb[0].numpy() if include_embeddings else None,
    )
