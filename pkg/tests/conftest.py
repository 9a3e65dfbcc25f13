import numpy as np
import pytest
import torch
from PIL import Image

from wavegan.config import ExperimentConfig
from wavegan.data import EpisodeDataset, build_manifest


def make_toy_dataset(root, num_classes=10, per_class=12, size=32, seed=0):
    """Synthetic class-folder dataset with strong class structure and
    plenty of high-frequency content (oriented gratings + noise)."""
    rng = np.random.default_rng(seed)
    for c in range(num_classes):
        d = root / f"class{c:02d}"
        d.mkdir(parents=True)
        angle = np.pi * c / num_classes
        freq = 2 + (c % 4)
        yy, xx = np.mgrid[0:size, 0:size] / size
        for i in range(per_class):
            phase = rng.uniform(0, 2 * np.pi)
            grating = np.sin(2 * np.pi * freq * (np.cos(angle) * xx + np.sin(angle) * yy) + phase)
            base = rng.uniform(0.2, 0.8, size=3)
            img = np.stack([0.5 + 0.35 * grating * b for b in base], axis=-1)
            img += rng.normal(0, 0.05, img.shape)
            arr = (np.clip(img, 0, 1) * 255).astype(np.uint8)
            Image.fromarray(arr).save(d / f"img{i:03d}.png")
    return root


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toyset")
    return make_toy_dataset(root)


@pytest.fixture(scope="session")
def toy_manifest(toy_root):
    return build_manifest(toy_root, seen_count=8, unseen_count=2, sup_fraction=0.5, seed=0)


@pytest.fixture()
def toy_config(toy_root):
    cfg = ExperimentConfig()
    cfg.data.root = str(toy_root)
    cfg.train.iterations = 10
    cfg.train.decay_start_iteration = 5
    cfg.train.checkpoint_interval = 5
    cfg.eval.images_per_class = 4
    return cfg


@pytest.fixture()
def seen_ds(toy_root, toy_manifest):
    return EpisodeDataset(toy_root, toy_manifest, 32, split="seen")
