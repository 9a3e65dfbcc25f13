"""Dataset ingestion, split manifests, and episode sampling.

Layout: one subdirectory per class under the dataset root, each holding
image files.  The manifest (YAML, versioned) binds classes to seen/unseen
and, for unseen classes, images to the support/query partition.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch
import yaml
from PIL import Image

from .errors import ConfigurationError, EpisodeError

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


@dataclass
class SplitManifest:
    """Class -> split assignment plus per-unseen-class sup/que partition."""

    version: int
    seen: List[str]
    unseen: List[str]
    # unseen class -> {"sup": [...], "que": [...]}; seen class -> {"all": [...]}
    images: Dict[str, Dict[str, List[str]]]
    seed: int

    def __post_init__(self):
        overlap = set(self.seen) & set(self.unseen)
        if overlap:
            raise ConfigurationError(f"classes in both splits: {sorted(overlap)}")
        for cls in self.unseen:
            parts = self.images[cls]
            both = set(parts["sup"]) & set(parts["que"])
            if both:
                raise ConfigurationError(f"{cls}: images in both sup and que: {sorted(both)}")

    def save(self, path: Path) -> None:
        payload = {
            "version": self.version,
            "seed": self.seed,
            "seen": self.seen,
            "unseen": self.unseen,
            "images": self.images,
        }
        Path(path).write_text(yaml.safe_dump(payload, sort_keys=True))

    @classmethod
    def load(cls, path: Path) -> "SplitManifest":
        payload = yaml.safe_load(Path(path).read_text())
        if payload.get("version") != MANIFEST_VERSION:
            raise ConfigurationError(
                f"unsupported manifest version {payload.get('version')}"
            )
        return cls(
            version=payload["version"],
            seen=payload["seen"],
            unseen=payload["unseen"],
            images=payload["images"],
            seed=payload["seed"],
        )


def list_class_images(root: Path) -> Dict[str, List[str]]:
    root = Path(root)
    classes = {}
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(
            f.name for f in d.iterdir() if f.suffix.lower() in IMAGE_EXTENSIONS
        )
        if files:
            classes[d.name] = files
    return classes


def build_manifest(
    root: Path,
    seen_count: int,
    unseen_count: int,
    sup_fraction: float = 0.5,
    seed: int = 0,
) -> SplitManifest:
    """Deterministic seeded class split; unseen classes are further split
    into support/query by `sup_fraction`."""
    classes = list_class_images(root)
    if len(classes) < seen_count + unseen_count:
        raise ConfigurationError(
            f"need {seen_count + unseen_count} classes, found {len(classes)} under {root}"
        )
    if not 0.0 < sup_fraction < 1.0:
        raise ConfigurationError("sup_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    names = sorted(classes)
    order = [names[i] for i in rng.permutation(len(names))]
    seen = sorted(order[:seen_count])
    unseen = sorted(order[seen_count : seen_count + unseen_count])
    images: Dict[str, Dict[str, List[str]]] = {}
    for cls in seen:
        images[cls] = {"all": classes[cls]}
    for cls in unseen:
        files = classes[cls]
        n_sup = max(1, int(round(sup_fraction * len(files))))
        if n_sup >= len(files):
            raise ConfigurationError(f"{cls}: too few images for a sup/que split")
        perm = [files[i] for i in rng.permutation(len(files))]
        images[cls] = {"sup": sorted(perm[:n_sup]), "que": sorted(perm[n_sup:])}
    return SplitManifest(MANIFEST_VERSION, seen, unseen, images, seed)


def load_image(path: Path, image_size: int) -> torch.Tensor:
    """Decode, center-crop square, resize, RGB, scaled to [-1, 1].

    Returns (3, image_size, image_size)."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        w, h = im.size
        side = min(w, h)
        left = (w - side) // 2
        top = (h - side) // 2
        im = im.crop((left, top, left + side, top + side))
        im = im.resize((image_size, image_size), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float32)
    return torch.from_numpy(arr).permute(2, 0, 1) / 127.5 - 1.0


def save_image(tensor: torch.Tensor, path: Path) -> None:
    """Write one (3, H, W) image in [-1, 1] as 8-bit PNG."""
    arr = ((tensor.clamp(-1, 1) + 1.0) * 127.5).round().byte()
    Image.fromarray(arr.permute(1, 2, 0).numpy()).save(path)


class EpisodeDataset:
    """Seen-class episode source backed by a manifest.

    Images are loaded lazily and cached; every read is counted per path so
    protocol guards can verify that only the allowed partition was touched.
    """

    def __init__(
        self,
        root: Path,
        manifest: SplitManifest,
        image_size: int,
        split: str = "seen",
        partition: Optional[str] = None,
    ):
        if split not in ("seen", "unseen"):
            raise ConfigurationError(f"unknown split {split!r}")
        self.root = Path(root)
        self.manifest = manifest
        self.image_size = image_size
        self.split = split
        self.partition = partition
        self.read_counts: Dict[str, int] = {}
        self._cache: Dict[str, torch.Tensor] = {}
        self.class_names = list(manifest.seen if split == "seen" else manifest.unseen)
        self.class_to_id = {c: i for i, c in enumerate(self.class_names)}
        self._files: Dict[str, List[str]] = {}
        for cls in self.class_names:
            parts = manifest.images[cls]
            if split == "seen":
                self._files[cls] = parts["all"]
            else:
                if partition not in ("sup", "que"):
                    raise ConfigurationError("unseen split needs partition 'sup' or 'que'")
                self._files[cls] = parts[partition]
        self._warned: set = set()

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def class_files(self, cls: str) -> List[str]:
        return list(self._files[cls])

    def load(self, cls: str, filename: str) -> torch.Tensor:
        if filename not in self._files[cls]:
            raise ConfigurationError(f"{cls}/{filename} is outside this dataset's partition")
        key = f"{cls}/{filename}"
        self.read_counts[key] = self.read_counts.get(key, 0) + 1
        if key not in self._cache:
            self._cache[key] = load_image(self.root / cls / filename, self.image_size)
        return self._cache[key]

    def sample_episode(self, k: int, rng: np.random.Generator) -> "Episode":
        """Uniform class choice, then k distinct images without
        replacement.  Classes with fewer than k images are excluded."""
        eligible = [c for c in self.class_names if len(self._files[c]) >= k]
        skipped = set(self.class_names) - set(eligible)
        for c in skipped - self._warned:
            logger.warning("class %s has fewer than %d images; excluded from sampling", c, k)
            self._warned.add(c)
        if not eligible:
            raise EpisodeError(f"no class has >= {k} images")
        cls = eligible[int(rng.integers(len(eligible)))]
        files = self._files[cls]
        picks = rng.choice(len(files), size=k, replace=False)
        imgs = torch.stack([self.load(cls, files[i]) for i in picks])
        return Episode(imgs, self.class_to_id[cls], self.split)


@dataclass
class Episode:
    """One K-shot task: K images of a single class."""

    images: torch.Tensor  # (K, C, H, W)
    class_id: int
    source: str = "seen"

    def __post_init__(self):
        if self.images.shape[0] < 2:
            raise EpisodeError("episodes need K >= 2 images")
        if self.source not in ("seen", "unseen"):
            raise EpisodeError(f"unknown source {self.source!r}")
