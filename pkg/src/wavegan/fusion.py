"""Local representation fusion (LoF-style).

Given the K encoded features of one episode, pick a random base feature,
match every base location against the reference features by cosine
similarity over channel vectors, and replace the base vectors with the
alpha-weighted combination of base and best-matching reference vectors.
The chosen base index and alpha are recorded so the decoder's base-index
aggregation and the reconstruction loss can reuse them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .errors import ContractError, EpisodeError


@dataclass
class FusionPlan:
    """Sampled fusion decisions for one episode.

    `replaced_positions` is a (h, w) bool tensor filled in by
    :func:`fuse_local`; it stays None until fusion has run.
    """

    base_index: int
    alpha: torch.Tensor  # (K,), nonnegative, sums to 1
    fuse_fraction: float = 1.0
    top_n: int = 1
    position_seed: int = 0
    replaced_positions: Optional[torch.Tensor] = field(default=None, repr=False)

    def __post_init__(self):
        k = self.alpha.numel()
        if not 0 <= self.base_index < k:
            raise ContractError(f"base_index {self.base_index} out of range for K={k}")
        if abs(float(self.alpha.sum()) - 1.0) > 1e-6:
            raise ContractError("alpha must sum to 1")


def make_fusion_plan(
    k: int,
    rng: np.random.Generator | int,
    fuse_fraction: float = 1.0,
    top_n: int = 1,
) -> FusionPlan:
    """Sample a plan: uniform base index, alpha flat on the simplex.

    Deterministic given the generator state (or an int seed).
    """
    if k < 2:
        raise EpisodeError(f"fusion needs K >= 2 features, got K={k}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    base_index = int(rng.integers(k))
    alpha = torch.from_numpy(rng.dirichlet(np.ones(k))).float()
    position_seed = int(rng.integers(2 ** 31))
    return FusionPlan(base_index, alpha, fuse_fraction, top_n, position_seed)


def similarity_map(base: torch.Tensor, refs: torch.Tensor) -> torch.Tensor:
    """Cosine similarity between every base location and every reference
    location.

    base: (C, h, w); refs: (R, C, h, w).  Returns (R, h*w, h*w) with
    entry [r, p, q] = cos(base[:, p], refs[r, :, q]).  Zero-norm vectors
    get similarity 0 rather than NaN.
    """
    if base.shape[0] != refs.shape[1]:
        raise ContractError(
            f"channel mismatch: base C={base.shape[0]}, refs C={refs.shape[1]}"
        )
    c = base.shape[0]
    b = base.reshape(c, -1).t()  # (P, C)
    r = refs.reshape(refs.shape[0], c, -1).transpose(1, 2)  # (R, Q, C)
    b_norm = b.norm(dim=1, keepdim=True)
    r_norm = r.norm(dim=2, keepdim=True)
    # Zero-norm vectors: divide by 1 instead, numerator is already 0.
    sims = torch.matmul(b / b_norm.clamp(min=1e-12), (r / r_norm.clamp(min=1e-12)).transpose(1, 2))
    zero_b = (b_norm.squeeze(1) == 0)
    zero_r = (r_norm.squeeze(2) == 0)
    sims = sims.masked_fill(zero_b.unsqueeze(0).unsqueeze(2), 0.0)
    sims = sims.masked_fill(zero_r.unsqueeze(1), 0.0)
    return sims  # (R, P, Q)


def _select_positions(h: int, w: int, plan: FusionPlan) -> torch.Tensor:
    if plan.fuse_fraction >= 1.0:
        return torch.ones(h, w, dtype=torch.bool)
    n = max(1, int(round(plan.fuse_fraction * h * w)))
    rng = np.random.default_rng(plan.position_seed)
    flat = rng.choice(h * w, size=n, replace=False)
    mask = torch.zeros(h * w, dtype=torch.bool)
    mask[torch.from_numpy(flat)] = True
    return mask.reshape(h, w)


def fuse_local(features: torch.Tensor, plan: FusionPlan) -> torch.Tensor:
    """Fuse the episode features (K, C, h, w) under `plan`.

    At each fused location the base channel vector is replaced by
    alpha[base]*base + sum_r alpha[r]*(mean of the top-n most similar
    reference vectors of feature r).  Untouched locations keep the base
    vector; `plan.replaced_positions` records the fused mask.
    Differentiable w.r.t. `features` (matching indices are detached).
    """
    k, c, h, w = features.shape
    if plan.alpha.numel() != k:
        raise ContractError(f"plan is for K={plan.alpha.numel()}, features have K={k}")
    base = features[plan.base_index]
    ref_idx = [i for i in range(k) if i != plan.base_index]
    mask = _select_positions(h, w, plan)
    plan.replaced_positions = mask

    alpha = plan.alpha.to(features.dtype)
    fused_flat = alpha[plan.base_index] * base.reshape(c, -1).t()  # (P, C)
    if ref_idx:
        refs = features[ref_idx]
        sims = similarity_map(base.detach(), refs.detach())  # (R, P, Q)
        top = sims.topk(min(plan.top_n, h * w), dim=2).indices  # (R, P, n)
        refs_flat = refs.reshape(len(ref_idx), c, -1).transpose(1, 2)  # (R, Q, C)
        for j, fi in enumerate(ref_idx):
            matched = refs_flat[j][top[j]]  # (P, n, C)
            fused_flat = fused_flat + alpha[fi] * matched.mean(dim=1)

    fused = fused_flat.t().reshape(c, h, w)
    flat_mask = mask.reshape(1, h, w)
    return torch.where(flat_mask, fused, base)


def fuse_images(images: torch.Tensor, plan: FusionPlan) -> torch.Tensor:
    """Image-level fusion target for the reconstruction loss.

    images: (K, C, H, W).  The base image, with the fused feature
    positions upscaled (nearest) to image resolution and blended by
    alpha across the K inputs.
    """
    if plan.replaced_positions is None:
        raise ContractError("plan has no replaced_positions; run fuse_local first")
    k, c, hh, ww = images.shape
    if plan.alpha.numel() != k:
        raise ContractError(f"plan is for K={plan.alpha.numel()}, images have K={k}")
    mask = plan.replaced_positions
    mask_img = (
        torch.nn.functional.interpolate(
            mask[None, None].float(), size=(hh, ww), mode="nearest"
        )[0, 0]
        > 0.5
    )
    alpha = plan.alpha.to(images.dtype)
    blended = (alpha.view(k, 1, 1, 1) * images).sum(dim=0)
    return torch.where(mask_img, blended, images[plan.base_index])
