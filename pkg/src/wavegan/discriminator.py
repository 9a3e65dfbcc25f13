"""Adversarial critic with an auxiliary classification head.

Four pre-activation residual blocks, each downsampling by average
pooling, followed by global pooling and two fully connected heads: a
scalar adversarial score (no output nonlinearity, as required by the
hinge loss) and class logits over the seen classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigurationError


@dataclass
class DiscriminatorConfig:
    image_size: int = 32
    in_channels: int = 3
    num_classes: int = 8
    channels: Tuple[int, ...] = (32, 64, 128, 128)

    def __post_init__(self):
        if self.num_classes < 1:
            raise ConfigurationError("num_classes must be >= 1")
        if len(self.channels) != 4:
            raise ConfigurationError("exactly four residual widths expected")


class DiscriminatorOutput(NamedTuple):
    adv_score: torch.Tensor  # (B,)
    class_logits: torch.Tensor  # (B, num_classes)


class ResBlockDown(nn.Module):
    """Pre-activation residual block with average-pool downsampling."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv2d(c_in, c_out, 1, bias=False) if c_in != c_out else nn.Identity()

    def forward(self, x):
        h = self.conv1(F.leaky_relu(x, 0.2))
        h = self.conv2(F.leaky_relu(h, 0.2))
        h = F.avg_pool2d(h, 2)
        return h + F.avg_pool2d(self.skip(x), 2)


class Discriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        ch = cfg.channels
        self.stem = nn.Conv2d(cfg.in_channels, ch[0], 3, padding=1)
        self.blocks = nn.ModuleList(
            ResBlockDown(ch[i], ch[min(i + 1, 3)]) for i in range(4)
        )
        self.adv_head = nn.Linear(ch[3], 1)
        self.cls_head = nn.Linear(ch[3], cfg.num_classes)

    def forward(self, x: torch.Tensor) -> DiscriminatorOutput:
        h = self.stem(x)
        for block in self.blocks:
            h = block(h)
        h = F.leaky_relu(h, 0.2).mean(dim=(2, 3))
        return DiscriminatorOutput(self.adv_head(h).squeeze(1), self.cls_head(h))
