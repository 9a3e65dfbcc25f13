"""Experiment configuration: one versioned YAML document covering data,
model, losses, training, and evaluation, with dotted-key overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, Tuple

import yaml

from .discriminator import DiscriminatorConfig
from .errors import ConfigurationError
from .generator import GeneratorConfig
from .losses import LossWeights

CONFIG_VERSION = 1


@dataclass
class DataConfig:
    root: str = "data"
    manifest: str = "manifest.yaml"
    image_size: int = 32


@dataclass
class TrainConfig:
    iterations: int = 100_000
    batch_episodes: int = 8
    k_shot: int = 3
    lr: float = 1e-4
    decay_start_iteration: int = 50_000
    seed: int = 0
    checkpoint_interval: int = 1000
    adam_betas: Tuple[float, float] = (0.5, 0.999)

    def __post_init__(self):
        if not 0 <= self.decay_start_iteration < self.iterations:
            raise ConfigurationError(
                "decay_start_iteration must lie in [0, iterations)"
            )


@dataclass
class EvalConfig:
    images_per_class: int = 128
    embed_dim: int = 64
    embed_seed: int = 1234


@dataclass
class ExperimentConfig:
    version: int = CONFIG_VERSION
    data: DataConfig = field(default_factory=DataConfig)
    model: GeneratorConfig = field(default_factory=GeneratorConfig)
    disc: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        # keep the cross-module knobs consistent
        self.model.image_size = self.data.image_size
        self.disc.image_size = self.data.image_size
        self.model.k_shot = self.train.k_shot


def _to_dict(obj: Any) -> Any:
    if is_dataclass(obj):
        return {f.name: _to_dict(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def _from_dict(cls, payload: Dict[str, Any]):
    known = {f.name: f for f in fields(cls)}
    unknown = set(payload) - set(known)
    if unknown:
        raise ConfigurationError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    kwargs = {}
    for name, value in payload.items():
        ftype = known[name].type
        if is_dataclass_name(ftype):
            kwargs[name] = _from_dict(_resolve(ftype), value)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


_NESTED = {
    "DataConfig": DataConfig,
    "GeneratorConfig": GeneratorConfig,
    "DiscriminatorConfig": DiscriminatorConfig,
    "LossWeights": LossWeights,
    "TrainConfig": TrainConfig,
    "EvalConfig": EvalConfig,
}


def is_dataclass_name(tp) -> bool:
    name = tp if isinstance(tp, str) else getattr(tp, "__name__", "")
    return name in _NESTED


def _resolve(tp):
    return _NESTED[tp] if isinstance(tp, str) else tp


def to_yaml(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(_to_dict(cfg), sort_keys=True)


def save_config(cfg: ExperimentConfig, path: Path) -> None:
    Path(path).write_text(to_yaml(cfg))


def load_config(path: Path) -> ExperimentConfig:
    payload = yaml.safe_load(Path(path).read_text())
    if payload.get("version") != CONFIG_VERSION:
        raise ConfigurationError(f"unsupported config version {payload.get('version')}")
    return _from_dict(ExperimentConfig, payload)


def _parse_scalar(text: str) -> Any:
    # YAML 1.1 misses dot-less exponent floats like "2e-4"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return yaml.safe_load(text)


def apply_overrides(cfg: ExperimentConfig, overrides: Dict[str, str]) -> ExperimentConfig:
    """Apply dotted-key overrides like {"train.lr": "2e-4"}.  Unknown keys
    are rejected."""
    payload = _to_dict(cfg)
    for dotted, raw in overrides.items():
        parts = dotted.split(".")
        node = payload
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node:
                raise ConfigurationError(f"unknown config key: {dotted}")
            node = node[p]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigurationError(f"unknown config key: {dotted}")
        node[parts[-1]] = _parse_scalar(raw)
    return _from_dict(ExperimentConfig, payload)
