"""Episodic adversarial training on seen classes.

One step = one discriminator update on (real episode images, generated
images) followed by one generator update, Adam with betas (0.5, 0.999)
and a linear learning-rate decay to zero.  Runs are seeded end to end and
resumable: checkpoints carry model/optimizer state plus every RNG state.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch

from . import losses as L
from .config import ExperimentConfig, TrainConfig, save_config
from .data import EpisodeDataset
from .discriminator import Discriminator
from .errors import ConfigurationError
from .fusion import fuse_images, make_fusion_plan
from .generator import Generator

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
METRIC_COLUMNS = [
    "step",
    "l_adv_g",
    "l_adv_d",
    "l_cls_g",
    "l_cls_d",
    "l_fre",
    "l_rec",
    "l_total_g",
    "l_total_d",
    "lr",
]


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """Constant lr until decay_start_iteration, then linear to 0 at
    cfg.iterations."""
    if step < 0 or step > cfg.iterations:
        raise ValueError(f"step {step} outside [0, {cfg.iterations}]")
    if step <= cfg.decay_start_iteration:
        return cfg.lr
    span = cfg.iterations - cfg.decay_start_iteration
    return cfg.lr * (cfg.iterations - step) / span


def _set_lr(opt: torch.optim.Optimizer, lr: float) -> None:
    for group in opt.param_groups:
        group["lr"] = lr


class Trainer:
    def __init__(
        self,
        cfg: ExperimentConfig,
        dataset: EpisodeDataset,
        out_dir: Path,
        run_id: str = "run",
    ):
        if dataset.split != "seen":
            raise ConfigurationError(
                "training only accepts the seen split; got unseen-class data"
            )
        self.cfg = cfg
        self.dataset = dataset
        self.out_dir = Path(out_dir) / run_id
        self.out_dir.mkdir(parents=True, exist_ok=True)
        cfg.disc.num_classes = dataset.num_classes
        torch.manual_seed(cfg.train.seed)
        self.G = Generator(cfg.model)
        self.D = Discriminator(cfg.disc)
        betas = cfg.train.adam_betas
        self.opt_g = torch.optim.Adam(self.G.parameters(), lr=cfg.train.lr, betas=betas)
        self.opt_d = torch.optim.Adam(self.D.parameters(), lr=cfg.train.lr, betas=betas)
        self.rng = np.random.default_rng(cfg.train.seed)
        self.step = 0
        self.metrics_path = self.out_dir / "metrics.csv"
        save_config(cfg, self.out_dir / "config.yaml")

    # -- one optimization step ------------------------------------------

    def train_step(self) -> Dict[str, float]:
        cfg = self.cfg
        k = cfg.train.k_shot
        lr = lr_schedule(self.step, cfg.train)
        _set_lr(self.opt_g, lr)
        _set_lr(self.opt_d, lr)

        episodes = [
            self.dataset.sample_episode(k, self.rng)
            for _ in range(cfg.train.batch_episodes)
        ]
        plans = [
            make_fusion_plan(k, self.rng, cfg.model.fuse_fraction, cfg.model.fuse_top_n)
            for _ in episodes
        ]

        # D update
        fakes, targets = [], []
        with torch.no_grad():
            for ep, plan in zip(episodes, plans):
                fake, _ = self.G(ep.images, plan=plan)
                fakes.append(fake)
                if cfg.model.use_lof:
                    targets.append(fuse_images(ep.images, plan))
                else:
                    # no fusion plan was applied; target mirrors the
                    # bottleneck's uniform mix of the inputs
                    targets.append(ep.images.mean(dim=0))
        fake_batch = torch.cat(fakes)
        real_batch = torch.cat([ep.images for ep in episodes])
        real_labels = torch.tensor(
            [ep.class_id for ep in episodes for _ in range(k)], dtype=torch.long
        )
        ep_labels = torch.tensor([ep.class_id for ep in episodes], dtype=torch.long)

        d_real = self.D(real_batch)
        d_fake = self.D(fake_batch)
        l_adv_d = L.hinge_d(d_real.adv_score, d_fake.adv_score)
        l_cls_d = L.classification_loss(d_real.class_logits, real_labels)
        l_d = L.total_d(l_adv_d, l_cls_d, cfg.loss)
        self.opt_d.zero_grad()
        l_d.backward()
        self.opt_d.step()

        # G update (fresh forward through G with the same plans)
        fakes_g = []
        for ep, plan in zip(episodes, plans):
            fake, _ = self.G(ep.images, plan=plan)
            fakes_g.append(fake)
        fake_batch_g = torch.cat(fakes_g)
        d_fake_g = self.D(fake_batch_g)
        l_adv_g = L.hinge_g(d_fake_g.adv_score)
        l_cls_g = L.classification_loss(d_fake_g.class_logits, ep_labels)
        l_fre = torch.stack(
            [L.frequency_l1(t.unsqueeze(0), f) for f, t in zip(fakes_g, targets)]
        ).mean()
        l_rec = torch.stack(
            [L.local_reconstruction(f, t.unsqueeze(0)) for f, t in zip(fakes_g, targets)]
        ).mean()
        l_g = L.total_g(l_adv_g, l_cls_g, l_fre, l_rec, cfg.loss)
        self.opt_g.zero_grad()
        l_g.backward()
        self.opt_g.step()

        metrics = {
            "step": self.step,
            "l_adv_g": l_adv_g.item(),
            "l_adv_d": l_adv_d.item(),
            "l_cls_g": l_cls_g.item(),
            "l_cls_d": l_cls_d.item(),
            "l_fre": l_fre.item(),
            "l_rec": l_rec.item(),
            "l_total_g": l_g.item(),
            "l_total_d": l_d.item(),
            "lr": lr,
        }
        for name, value in metrics.items():
            if not np.isfinite(value):
                raise FloatingPointError(
                    f"non-finite loss at step {self.step}: {name}={value}; "
                    f"full components: {metrics}"
                )
        self.step += 1
        return metrics

    # -- checkpointing ---------------------------------------------------

    def checkpoint_path(self, step: int) -> Path:
        return self.out_dir / f"{step:07d}.ckpt"

    def save_checkpoint(self, final: bool = False) -> Path:
        path = self.checkpoint_path(self.step)
        torch.save(
            {
                "version": CHECKPOINT_VERSION,
                "step": self.step,
                "final": final,
                "generator": self.G.state_dict(),
                "discriminator": self.D.state_dict(),
                "opt_g": self.opt_g.state_dict(),
                "opt_d": self.opt_d.state_dict(),
                "numpy_rng": self.rng.bit_generator.state,
                "torch_rng": torch.get_rng_state(),
                "model_config": self.cfg.model,
                "disc_config": self.cfg.disc,
            },
            path,
        )
        manifest = self.out_dir / "checkpoints.txt"
        with manifest.open("a") as fh:
            fh.write(f"{path.name}{' final' if final else ''}\n")
        return path

    def load_checkpoint(self, path: Path) -> None:
        state = torch.load(path, weights_only=False)
        if state["version"] != CHECKPOINT_VERSION:
            raise ConfigurationError(f"unsupported checkpoint version {state['version']}")
        self.step = state["step"]
        self.G.load_state_dict(state["generator"])
        self.D.load_state_dict(state["discriminator"])
        self.opt_g.load_state_dict(state["opt_g"])
        self.opt_d.load_state_dict(state["opt_d"])
        self.rng.bit_generator.state = state["numpy_rng"]
        torch.set_rng_state(state["torch_rng"])

    def latest_checkpoint(self) -> Optional[Path]:
        ckpts = sorted(self.out_dir.glob("*.ckpt"))
        return ckpts[-1] if ckpts else None

    # -- full run ---------------------------------------------------------

    def run(self, resume: bool = False) -> List[Dict[str, float]]:
        if resume:
            latest = self.latest_checkpoint()
            if latest is not None:
                logger.info("resuming from %s", latest)
                self.load_checkpoint(latest)
        write_header = not self.metrics_path.exists() or not resume
        mode = "a" if resume and self.metrics_path.exists() else "w"
        history = []
        with self.metrics_path.open(mode, newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
            if write_header:
                writer.writeheader()
            while self.step < self.cfg.train.iterations:
                metrics = self.train_step()
                writer.writerow(metrics)
                history.append(metrics)
                if self.step % self.cfg.train.checkpoint_interval == 0:
                    self.save_checkpoint()
        self.save_checkpoint(final=True)
        return history


def load_generator(path: Path) -> Generator:
    """Rebuild a generator from a checkpoint file."""
    state = torch.load(path, weights_only=False)
    g = Generator(state["model_config"])
    g.load_state_dict(state["generator"])
    g.eval()
    return g
