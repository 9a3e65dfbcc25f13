"""Frequency-aware generator: WaveEncoder + WaveDecoder.

Encoder: five conv blocks (conv-BN-LeakyReLU, stride 2 after the first
block keeps spatial halving per level).  After each of the first four
blocks the output is Haar-decomposed; the LL band is added to the next
block's output (low-frequency skip), and all four bands are stored for
the decoder.  The bottleneck applies local fusion.

Decoder: four upsampling blocks (nearest x2 + conv block) plus an output
conv with tanh.  At each level the mirrored encoder level's high bands
are aggregated (Mean or BaseIndex), reconstructed with LL zeroed, and
added to the running feature (high-frequency skip).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn

from .errors import ConfigurationError, ContractError
from .fusion import FusionPlan, fuse_local, make_fusion_plan
from .wavelet import FrequencyBands, haar_decompose, partial_reconstruct

HF_BANDS = ("lh", "hl", "hh")


@dataclass
class GeneratorConfig:
    image_size: int = 32
    in_channels: int = 3
    base_channels: int = 32
    k_shot: int = 3
    variant: str = "mean"  # "mean" | "base_index"
    use_ll_skip: bool = True
    use_hf_skip: bool = True
    hf_band_mask: Tuple[str, ...] = HF_BANDS
    use_lof: bool = True
    fuse_fraction: float = 1.0
    fuse_top_n: int = 1
    # encoder widths; decoder mirrors them
    channels: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.image_size < 16 or self.image_size & (self.image_size - 1):
            raise ConfigurationError(
                f"image_size must be a power of two >= 16, got {self.image_size}"
            )
        if self.variant not in ("mean", "base_index"):
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        bad = set(b.lower() for b in self.hf_band_mask) - set(HF_BANDS)
        if bad:
            raise ConfigurationError(f"hf_band_mask may only contain {HF_BANDS}, got {bad}")
        if not self.hf_band_mask:
            raise ConfigurationError("hf_band_mask must not be empty")
        if not self.channels:
            bc = self.base_channels
            self.channels = (bc, 2 * bc, 4 * bc, 4 * bc, 4 * bc)
        if len(self.channels) != 5:
            raise ConfigurationError("exactly five encoder widths expected")


@dataclass
class EncoderTrace:
    """Per-level encoder activations and frequency bands plus the fusion
    plan applied at the bottleneck (None when LoF is off)."""

    features: List[torch.Tensor]  # E_1..E_5, each (K, C_i, s_i, s_i)
    bands: List[FrequencyBands]  # levels 1..4
    plan: Optional[FusionPlan]
    bottleneck: torch.Tensor  # (1, C_5, s_5, s_5) after fusion


class ConvBlock(nn.Module):
    """conv 3x3 + batch norm + leaky relu."""

    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1)
        self.bn = nn.BatchNorm2d(c_out)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        return self.act(self.bn(self.conv(x)))


class WaveEncoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        ch = cfg.channels
        blocks = [ConvBlock(cfg.in_channels, ch[0], stride=1)]
        for i in range(1, 5):
            blocks.append(ConvBlock(ch[i - 1], ch[i], stride=2))
        self.blocks = nn.ModuleList(blocks)
        # 1x1 projections adapting LL_i channels to the next level's width
        projs = []
        for i in range(4):
            projs.append(
                nn.Identity() if ch[i] == ch[i + 1] else nn.Conv2d(ch[i], ch[i + 1], 1, bias=False)
            )
        self.ll_projs = nn.ModuleList(projs)

    def forward(
        self, x: torch.Tensor, plan: Optional[FusionPlan], rng: Optional[np.random.Generator]
    ) -> EncoderTrace:
        cfg = self.cfg
        k = x.shape[0]
        feats: List[torch.Tensor] = []
        bands: List[FrequencyBands] = []
        e = self.blocks[0](x)
        feats.append(e)
        for i in range(1, 5):
            prev_bands = haar_decompose(feats[-1])
            bands.append(prev_bands)
            e = self.blocks[i](feats[-1])
            if cfg.use_ll_skip:
                e = e + self.ll_projs[i - 1](prev_bands.ll)
            feats.append(e)

        bottleneck = feats[-1]
        if cfg.use_lof:
            if plan is None:
                if rng is None:
                    raise ContractError("LoF needs a FusionPlan or an rng to sample one")
                plan = make_fusion_plan(k, rng, cfg.fuse_fraction, cfg.fuse_top_n)
            fused = fuse_local(bottleneck, plan).unsqueeze(0)
        else:
            fused = bottleneck.mean(dim=0, keepdim=True)
        return EncoderTrace(feats, bands, plan, fused)


def aggregate_bands_mean(band_sets: FrequencyBands) -> FrequencyBands:
    """Elementwise mean over the K members of one level's bands.

    `band_sets` holds (K, C, h, w) tensors; the result has K collapsed to 1.
    Computed as first member plus the mean deviation, so duplicated
    members average to the member bit-exactly.
    """
    def _mean(b: torch.Tensor) -> torch.Tensor:
        first = b[0:1]
        return first + (b - first).mean(dim=0, keepdim=True)

    return band_sets.map(_mean)


def aggregate_bands_base(band_sets: FrequencyBands, plan: FusionPlan) -> FrequencyBands:
    """Select the base-indexed member's bands, bit-identical."""
    k = band_sets.ll.shape[0]
    if not 0 <= plan.base_index < k:
        raise ContractError(f"base_index {plan.base_index} out of range for K={k}")
    return band_sets.map(lambda b: b[plan.base_index : plan.base_index + 1])


class WaveDecoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        ch = cfg.channels
        # decoder level i consumes encoder level 5-i's bands; widths mirror
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        dec_ch = [ch[4], ch[3], ch[2], ch[1], ch[0]]
        self.blocks = nn.ModuleList(
            ConvBlock(dec_ch[i], dec_ch[i + 1]) for i in range(4)
        )
        # reconstructed HF at decoder level i has encoder level (4-i)'s width
        projs = []
        for i in range(4):
            src, dst = ch[3 - i], dec_ch[i + 1]
            projs.append(nn.Identity() if src == dst else nn.Conv2d(src, dst, 1, bias=False))
        self.hf_projs = nn.ModuleList(projs)
        self.out_conv = nn.Conv2d(ch[0], cfg.in_channels, 3, padding=1)

    def forward(self, trace: EncoderTrace) -> torch.Tensor:
        cfg = self.cfg
        if cfg.variant == "base_index" and cfg.use_hf_skip and trace.plan is None:
            raise ConfigurationError("base_index variant requires a FusionPlan in the trace")
        f = trace.bottleneck
        for i, block in enumerate(self.blocks):
            f = block(self.up(f))
            if cfg.use_hf_skip:
                level_bands = trace.bands[3 - i]  # mirror: encoder level 4-i
                if cfg.variant == "mean":
                    agg = aggregate_bands_mean(level_bands)
                else:
                    agg = aggregate_bands_base(level_bands, trace.plan)
                hf = partial_reconstruct(agg, cfg.hf_band_mask)
                f = f + self.hf_projs[i](hf)
        return torch.tanh(self.out_conv(f))


class Generator(nn.Module):
    """WaveEncoder + WaveDecoder over one K-shot episode."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = WaveEncoder(cfg)
        self.decoder = WaveDecoder(cfg)

    def forward(
        self,
        images: torch.Tensor,
        plan: Optional[FusionPlan] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[torch.Tensor, EncoderTrace]:
        """images: (K, C, S, S) in [-1, 1].  Returns ((1, C, S, S), trace)."""
        if images.dim() != 4 or images.shape[-1] != self.cfg.image_size:
            raise ContractError(
                f"expected (K, C, {self.cfg.image_size}, {self.cfg.image_size}), "
                f"got {tuple(images.shape)}"
            )
        trace = self.encoder(images, plan, rng)
        out = self.decoder(trace)
        return out, trace
