"""End-to-end pipelines: train -> generate -> evaluate, shot sweeps, and
the ablation grid.  Shared by the CLI and the acceptance suite."""

from __future__ import annotations

import copy
import csv
import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import torch

from .config import ExperimentConfig
from .data import EpisodeDataset, SplitManifest
from .evaluation import ProxyEmbedder, evaluate_generation, generate_set
from .generator import Generator
from .training import Trainer, load_generator

logger = logging.getLogger(__name__)

ABLATION_CONDITIONS = {
    "full": {},
    "wo_lof": {"use_lof": False},
    "wo_ll": {"use_ll_skip": False},
    "wo_hl": {"use_hf_skip": False},
    "wo_l1_loss": None,  # handled via loss weights
}


def seen_dataset(cfg: ExperimentConfig, manifest: SplitManifest) -> EpisodeDataset:
    return EpisodeDataset(cfg.data.root, manifest, cfg.data.image_size, split="seen")


def unseen_dataset(cfg: ExperimentConfig, manifest: SplitManifest, partition: str) -> EpisodeDataset:
    return EpisodeDataset(
        cfg.data.root, manifest, cfg.data.image_size, split="unseen", partition=partition
    )


def train_pipeline(
    cfg: ExperimentConfig, manifest: SplitManifest, out: Path, run_id: str, resume: bool = False
) -> Path:
    trainer = Trainer(cfg, seen_dataset(cfg, manifest), out, run_id)
    trainer.run(resume=resume)
    return trainer.checkpoint_path(trainer.step)


def evaluate_pipeline(
    cfg: ExperimentConfig,
    manifest: SplitManifest,
    checkpoint: Path,
    out_dir: Path,
    seed: int,
    k: Optional[int] = None,
    n: Optional[int] = None,
) -> Dict:
    """Generate from the support partition and score against the query
    partition; writes summary.json and returns the summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    generator = load_generator(checkpoint)
    sup = unseen_dataset(cfg, manifest, "sup")
    que = unseen_dataset(cfg, manifest, "que")
    k = k or cfg.train.k_shot
    n = n or cfg.eval.images_per_class
    gs = generate_set(generator, sup, k, n, seed, checkpoint=str(checkpoint))
    embedder = ProxyEmbedder(cfg.eval.embed_dim, cfg.eval.embed_seed, cfg.model.in_channels)
    summary = evaluate_generation(gs, que, embedder)
    summary["checkpoint"] = str(checkpoint)
    summary["seed"] = seed
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    with (out_dir / "metrics.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "fid", "lpips_proxy"])
        for cls, row in sorted(summary["per_class"].items()):
            writer.writerow([cls, row["fid"], row["lpips_proxy"]])
        writer.writerow(["__all__", summary["fid"], summary["lpips_proxy"]])
    return summary


def _condition_config(cfg: ExperimentConfig, condition: str) -> ExperimentConfig:
    cfg = copy.deepcopy(cfg)
    switches = ABLATION_CONDITIONS[condition]
    if switches is None:  # wo_l1_loss: drop the frequency L1 term
        cfg.loss.lambda_fre = 0.0
    else:
        for key, value in switches.items():
            setattr(cfg.model, key, value)
    return cfg


def ablation_pipeline(
    cfg: ExperimentConfig,
    manifest: SplitManifest,
    out: Path,
    run_id: str,
    conditions: Sequence[str] = tuple(ABLATION_CONDITIONS),
    eval_seed: int = 0,
) -> Path:
    """Train and evaluate every ablation condition; emit a CSV with
    rows = conditions, cols = fid / lpips_proxy."""
    out = Path(out) / run_id
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for cond in conditions:
        if cond not in ABLATION_CONDITIONS:
            raise ValueError(f"unknown ablation condition {cond!r}")
        ccfg = _condition_config(cfg, cond)
        ckpt = train_pipeline(ccfg, manifest, out, cond)
        summary = evaluate_pipeline(ccfg, manifest, ckpt, out / cond / "eval", eval_seed)
        rows.append((cond, summary["fid"], summary["lpips_proxy"]))
        logger.info("ablation %s: fid=%.4f lpips_proxy=%.4f", cond, rows[-1][1], rows[-1][2])
    table = out / "ablation.csv"
    with table.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "fid", "lpips_proxy"])
        writer.writerows(rows)
    return table


def shot_sweep(
    cfg: ExperimentConfig,
    manifest: SplitManifest,
    out: Path,
    run_id: str,
    k_values: Sequence[int] = (2, 3, 5),
    variants: Sequence[str] = ("mean", "base_index"),
    eval_seed: int = 0,
) -> Path:
    """Train and evaluate both variants at each K; per-K failures are
    isolated and a partial table is still emitted."""
    out = Path(out) / run_id
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for variant in variants:
        for k in k_values:
            name = f"{variant}_k{k}"
            try:
                ccfg = copy.deepcopy(cfg)
                ccfg.train.k_shot = k
                ccfg.model.k_shot = k
                ccfg.model.variant = variant
                ckpt = train_pipeline(ccfg, manifest, out, name)
                summary = evaluate_pipeline(
                    ccfg, manifest, ckpt, out / name / "eval", eval_seed, k=k
                )
                rows.append((variant, k, summary["fid"], summary["lpips_proxy"]))
            except Exception:
                logger.exception("sweep cell %s failed; continuing", name)
    table = out / "shot_sweep.csv"
    with table.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "k", "fid", "lpips_proxy"])
        writer.writerows(rows)
    return table
