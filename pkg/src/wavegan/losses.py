"""Training objectives: frequency L1, local reconstruction, hinge
adversarial, auxiliary classification, and their weighted totals.

Reduction convention: every loss is a mean over batch and elements; the
frequency loss sums the four per-band means.  This keeps the default
weights independent of resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import ShapeError
from .wavelet import haar_decompose


@dataclass
class LossWeights:
    lambda_cls_g: float = 1.0
    lambda_cls_d: float = 1.0
    lambda_fre: float = 1.0
    lambda_rec: float = 1.0


def frequency_l1(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """Band-wise L1 distance between the Haar decompositions of two
    image batches; sum over the four bands of per-band mean |diff|."""
    if x.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    bx = haar_decompose(x)
    by = haar_decompose(x_hat)
    return sum((a - b).abs().mean() for a, b in zip(bx, by))


def local_reconstruction(x_hat: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute error against the image-level fusion target."""
    if x_hat.shape != target.shape:
        raise ShapeError(f"shape mismatch: {tuple(x_hat.shape)} vs {tuple(target.shape)}")
    return (x_hat - target).abs().mean()


def hinge_d(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    return F.relu(1.0 - real_scores).mean() + F.relu(1.0 + fake_scores).mean()


def hinge_g(fake_scores: torch.Tensor) -> torch.Tensor:
    return -fake_scores.mean()


def classification_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Negative log softmax posterior of the true class, mean over batch."""
    if labels.min() < 0 or labels.max() >= logits.shape[-1]:
        raise ValueError(
            f"labels must lie in [0, {logits.shape[-1]}), got "
            f"[{int(labels.min())}, {int(labels.max())}]"
        )
    return F.cross_entropy(logits, labels)


def total_g(l_adv_g, l_cls_g, l_fre, l_rec, w: LossWeights) -> torch.Tensor:
    return l_adv_g + w.lambda_cls_g * l_cls_g + w.lambda_fre * l_fre + w.lambda_rec * l_rec


def total_d(l_adv_d, l_cls_d, w: LossWeights) -> torch.Tensor:
    return l_adv_d + w.lambda_cls_d * l_cls_d
