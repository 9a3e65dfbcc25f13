"""Unseen-class generation protocol, desk-scale quality metrics,
frequency visualization, shot sweeps, and the augmentation-classification
experiment.

The metric backend is a small seeded random-convolution embedder, so FID
and the LPIPS-style diversity score ("perceptual-proxy") are comparable
across runs of this codebase but not to published full-scale numbers.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import scipy.linalg
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import EpisodeDataset, save_image
from .discriminator import Discriminator, DiscriminatorConfig
from .errors import ConfigurationError, ShapeError
from .generator import Generator
from .fusion import make_fusion_plan
from .wavelet import haar_decompose

logger = logging.getLogger(__name__)


# -- generation protocol ---------------------------------------------------


@dataclass
class GenerationSet:
    """Per-unseen-class generated images plus provenance."""

    images: Dict[str, torch.Tensor]  # class name -> (N, C, H, W)
    checkpoint: str
    seed: int
    variant: str
    k_shot: int


def generate_set(
    generator: Generator,
    dataset: EpisodeDataset,
    k: int,
    n: int,
    seed: int,
    checkpoint: str = "",
) -> GenerationSet:
    """For each unseen class, sample K-shot support episodes and generate
    until N images exist.  Reads only the support partition."""
    if dataset.split != "unseen" or dataset.partition != "sup":
        raise ConfigurationError("generate_set requires the unseen support partition")
    rng = np.random.default_rng(seed)
    generator.eval()
    out: Dict[str, torch.Tensor] = {}
    for cls in dataset.class_names:
        files = dataset.class_files(cls)
        if len(files) < k:
            logger.warning("class %s has %d < K=%d support images; skipped", cls, len(files), k)
            continue
        imgs = []
        with torch.no_grad():
            while len(imgs) < n:
                picks = rng.choice(len(files), size=k, replace=False)
                episode = torch.stack([dataset.load(cls, files[i]) for i in picks])
                plan = make_fusion_plan(
                    k, rng, generator.cfg.fuse_fraction, generator.cfg.fuse_top_n
                )
                fake, _ = generator(episode, plan=plan)
                imgs.append(fake[0])
        out[cls] = torch.stack(imgs)
    return GenerationSet(out, checkpoint, seed, generator.cfg.variant, k)


# -- metric backend ---------------------------------------------------------


class ProxyEmbedder(nn.Module):
    """Fixed, seeded random convolutional embedding network.

    Stands in for the full-scale inception embedder at desk scale; its
    outputs are only meaningful for comparisons within this codebase.
    """

    def __init__(self, embed_dim: int = 64, seed: int = 1234, in_channels: int = 3):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        widths = [in_channels, 16, 32, embed_dim]
        self.convs = nn.ModuleList()
        for i in range(3):
            conv = nn.Conv2d(widths[i], widths[i + 1], 3, stride=2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(
                    torch.randn(conv.weight.shape, generator=gen) / widths[i] ** 0.5
                )
                conv.bias.zero_()
            self.convs.append(conv)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = x
        for conv in self.convs:
            h = F.leaky_relu(conv(h), 0.2)
        return h.mean(dim=(2, 3))

    def embed(self, images: torch.Tensor, batch: int = 64) -> np.ndarray:
        chunks = []
        with torch.no_grad():
            for i in range(0, images.shape[0], batch):
                chunks.append(self(images[i : i + batch]).numpy())
        return np.concatenate(chunks).astype(np.float64)


def frechet_distance(
    mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray, sigma2: np.ndarray, eps: float = 1e-6
) -> float:
    """Closed-form Fréchet distance between two Gaussians."""
    diff = mu1 - mu2
    covmean, _ = scipy.linalg.sqrtm(sigma1 @ sigma2, disp=False)
    if not np.isfinite(covmean).all():
        logger.warning("singular covariance product; adding %g to the diagonal", eps)
        offset = np.eye(sigma1.shape[0]) * eps
        covmean, _ = scipy.linalg.sqrtm((sigma1 + offset) @ (sigma2 + offset), disp=False)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    return float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * np.trace(covmean))


def _fit_gaussian(feats: np.ndarray):
    return feats.mean(axis=0), np.cov(feats, rowvar=False)


def compute_fid(
    set_a: torch.Tensor, set_b: torch.Tensor, embedder: ProxyEmbedder
) -> float:
    """Fréchet distance between Gaussian fits of the embedded sets."""
    if set_a.numel() == 0 or set_b.numel() == 0:
        raise ShapeError("FID needs non-empty image sets")
    fa = embedder.embed(set_a)
    fb = embedder.embed(set_b)
    return frechet_distance(*_fit_gaussian(fa), *_fit_gaussian(fb))


def compute_lpips_proxy(images: torch.Tensor, embedder: ProxyEmbedder) -> float:
    """Mean pairwise distance within the set, in embedder space
    (diversity reading: higher is more diverse)."""
    if images.shape[0] < 2:
        raise ShapeError("perceptual-proxy diversity needs at least two images")
    feats = embedder.embed(images)
    diffs = feats[:, None, :] - feats[None, :, :]
    dists = np.sqrt((diffs ** 2).sum(-1))
    n = feats.shape[0]
    return float(dists.sum() / (n * (n - 1)))


def evaluate_generation(
    gen_set: GenerationSet,
    query: EpisodeDataset,
    embedder: ProxyEmbedder,
) -> Dict:
    """Pool classes, compare generated vs. query images; also report
    per-class scores.  Returns the machine-readable summary dict."""
    if query.split != "unseen" or query.partition != "que":
        raise ConfigurationError("evaluation compares against the query partition")
    per_class = {}
    gen_all, real_all = [], []
    for cls, imgs in gen_set.images.items():
        reals = torch.stack([query.load(cls, f) for f in query.class_files(cls)])
        gen_all.append(imgs)
        real_all.append(reals)
        per_class[cls] = {
            "fid": compute_fid(imgs, reals, embedder),
            "lpips_proxy": compute_lpips_proxy(imgs, embedder),
        }
    gen_cat = torch.cat(gen_all)
    real_cat = torch.cat(real_all)
    return {
        "variant": gen_set.variant,
        "k": gen_set.k_shot,
        "fid": compute_fid(gen_cat, real_cat, embedder),
        "lpips_proxy": compute_lpips_proxy(gen_cat, embedder),
        "per_class": per_class,
    }


# -- frequency visualization -------------------------------------------------


def visualize_bands(images: torch.Tensor, out_dir: Path, prefix: str = "bands") -> List[Path]:
    """Emit one grid per call: rows = images, cols = 5 panels
    (LL, LH, HL, HH, LH+HL+HH).  Display normalization is recorded in a
    sidecar metadata file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bands = haar_decompose(images)
    detail = bands.lh + bands.hl + bands.hh
    panels = [bands.ll, bands.lh, bands.hl, bands.hh, detail]
    meta = {"panels": ["ll", "lh", "hl", "hh", "lh+hl+hh"], "normalization": {}}
    rows = []
    for i in range(images.shape[0]):
        row = []
        for name, p in zip(meta["panels"], panels):
            panel = p[i]
            lo, hi = float(panel.min()), float(panel.max())
            scale = max(hi - lo, 1e-12)
            meta["normalization"][f"img{i}/{name}"] = {"min": lo, "max": hi}
            row.append((panel - lo) / scale * 2.0 - 1.0)
        rows.append(torch.cat(row, dim=-1))
    grid = torch.cat(rows, dim=-2)
    grid_path = out_dir / f"{prefix}.png"
    save_image(grid, grid_path)
    meta_path = out_dir / f"{prefix}.json"
    meta_path.write_text(json.dumps(meta, indent=2))
    return [grid_path, meta_path]


# -- frequency statistics (used by the smoke acceptance check) ---------------


def hf_energy_fraction(images: torch.Tensor) -> float:
    """Share of band energy in the three detail bands."""
    b = haar_decompose(images)
    hf = sum(float((t * t).sum()) for t in (b.lh, b.hl, b.hh))
    total = hf + float((b.ll * b.ll).sum())
    return hf / max(total, 1e-12)


# -- augmentation-for-classification ------------------------------------------


class SmallClassifier(nn.Module):
    """Residual classifier reusing the critic trunk."""

    def __init__(self, num_classes: int, image_size: int = 32):
        super().__init__()
        cfg = DiscriminatorConfig(image_size=image_size, num_classes=num_classes)
        self.net = Discriminator(cfg)

    def forward(self, x):
        return self.net(x).class_logits


def _train_classifier(
    images: torch.Tensor, labels: torch.Tensor, num_classes: int, seed: int,
    epochs: int = 20, lr: float = 1e-3,
) -> SmallClassifier:
    torch.manual_seed(seed)
    model = SmallClassifier(num_classes, image_size=images.shape[-1])
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    n = images.shape[0]
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in range(0, n, 16):
            idx = torch.from_numpy(order[i : i + 16])
            opt.zero_grad()
            loss = F.cross_entropy(model(images[idx]), labels[idx])
            loss.backward()
            opt.step()
    model.eval()
    return model


def augment_classify(
    unseen_sup: EpisodeDataset,
    gen_sets: Dict[str, GenerationSet],
    train_per_class: int = 5,
    test_per_class: int = 5,
    augment_per_class: int = 10,
    seed: int = 0,
    epochs: int = 20,
) -> Dict[str, float]:
    """Train a small classifier on unseen-class images alone ("base") and
    with generated augmentation; report test accuracy per condition.

    `gen_sets` maps condition names to generation sets; classes lacking
    train+test images are excluded from every condition.
    """
    rng = np.random.default_rng(seed)
    need = train_per_class + test_per_class
    classes = [c for c in unseen_sup.class_names if len(unseen_sup.class_files(c)) >= need]
    if not classes:
        raise ConfigurationError("no unseen class has enough images for the protocol")
    train_x, train_y, test_x, test_y = [], [], [], []
    for ci, cls in enumerate(classes):
        files = unseen_sup.class_files(cls)
        picks = rng.permutation(len(files))[:need]
        for j, p in enumerate(picks):
            img = unseen_sup.load(cls, files[p])
            if j < train_per_class:
                train_x.append(img)
                train_y.append(ci)
            else:
                test_x.append(img)
                test_y.append(ci)
    train_x = torch.stack(train_x)
    train_y = torch.tensor(train_y)
    test_x = torch.stack(test_x)
    test_y = torch.tensor(test_y)

    def accuracy(model):
        with torch.no_grad():
            pred = model(test_x).argmax(dim=1)
        return float((pred == test_y).float().mean())

    results = {"base": accuracy(_train_classifier(train_x, train_y, len(classes), seed, epochs))}
    for name, gs in gen_sets.items():
        aug_x, aug_y = [train_x], [train_y]
        for ci, cls in enumerate(classes):
            if cls not in gs.images:
                continue
            extra = gs.images[cls][:augment_per_class]
            aug_x.append(extra)
            aug_y.append(torch.full((extra.shape[0],), ci, dtype=torch.long))
        model = _train_classifier(
            torch.cat(aug_x), torch.cat(aug_y), len(classes), seed, epochs
        )
        results[name] = accuracy(model)
    return results
