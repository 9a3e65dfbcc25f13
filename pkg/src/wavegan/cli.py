"""Command line entry point.

Commands: split, train, generate, evaluate, decompose, sweep, ablate.
Every command writes its artifacts under {out}/{run_id}/ together with a
reproducibility record (config snapshot, seed, package version).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import torch

from . import __version__
from .config import (
    ExperimentConfig,
    apply_overrides,
    load_config,
    save_config,
)
from .data import SplitManifest, build_manifest, save_image
from .errors import ConfigurationError
from .evaluation import visualize_bands
from .pipeline import (
    ablation_pipeline,
    evaluate_pipeline,
    shot_sweep,
    train_pipeline,
    unseen_dataset,
)
from .evaluation import generate_set
from .training import load_generator
from .data import load_image

logger = logging.getLogger(__name__)

OUT_ENV = "WAVEGAN_OUT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavegan")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="experiment config YAML")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[],
            metavar="KEY=VALUE", help="dotted-key config override",
        )
        p.add_argument("--run-id", default="run")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument(
            "--out", type=Path, default=Path(os.environ.get(OUT_ENV, "out")),
            help=f"output root (default from ${OUT_ENV} or ./out)",
        )
        return p

    p = common(sub.add_parser("split", help="build a seen/unseen split manifest"))
    p.add_argument("--seen", type=int, required=True)
    p.add_argument("--unseen", type=int, required=True)
    p.add_argument("--sup-fraction", type=float, default=0.5)

    p = common(sub.add_parser("train", help="episodic training on seen classes"))
    p.add_argument("--resume", action="store_true")

    p = common(sub.add_parser("generate", help="generate unseen-class images"))
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--num-images", type=int, default=None)

    p = common(sub.add_parser("evaluate", help="generate and score unseen classes"))
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--num-images", type=int, default=None)

    p = common(sub.add_parser("decompose", help="emit the 5-panel frequency grid"))
    p.add_argument("images", nargs="+", type=Path)

    p = common(sub.add_parser("sweep", help="shot sweep over K for both variants"))
    p.add_argument("--k-values", type=int, nargs="+", default=[2, 3, 5])

    common(sub.add_parser("ablate", help="run the ablation grid"))
    return parser


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key] = value
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    if args.seed is not None:
        cfg.train.seed = args.seed
    return cfg


def _record(out_dir: Path, cfg: ExperimentConfig, args) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out_dir / "config.yaml")
    (out_dir / "run.json").write_text(
        json.dumps(
            {
                "command": args.command,
                "run_id": args.run_id,
                "seed": cfg.train.seed,
                "version": __version__,
            },
            indent=2,
        )
    )


def _manifest(cfg: ExperimentConfig) -> SplitManifest:
    path = Path(cfg.data.manifest)
    if not path.is_absolute():
        path = Path(cfg.data.root) / path
    if not path.exists():
        raise ConfigurationError(
            f"manifest not found at {path}; run `wavegan split` first"
        )
    return SplitManifest.load(path)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_cfg(args)
        run_dir = args.out / args.run_id
        if args.command == "split":
            manifest = build_manifest(
                cfg.data.root, args.seen, args.unseen, args.sup_fraction, cfg.train.seed
            )
            path = Path(cfg.data.root) / cfg.data.manifest
            manifest.save(path)
            print(f"wrote {path}")
        elif args.command == "train":
            _record(run_dir, cfg, args)
            ckpt = train_pipeline(cfg, _manifest(cfg), args.out, args.run_id, resume=args.resume)
            print(f"final checkpoint: {ckpt}")
        elif args.command == "generate":
            _record(run_dir, cfg, args)
            generator = load_generator(args.checkpoint)
            sup = unseen_dataset(cfg, _manifest(cfg), "sup")
            n = args.num_images or cfg.eval.images_per_class
            gs = generate_set(
                generator, sup, cfg.train.k_shot, n, cfg.train.seed,
                checkpoint=str(args.checkpoint),
            )
            img_dir = run_dir / "images"
            for cls, imgs in gs.images.items():
                (img_dir / cls).mkdir(parents=True, exist_ok=True)
                for i, img in enumerate(imgs):
                    save_image(img, img_dir / cls / f"{i:04d}.png")
            print(f"wrote {sum(v.shape[0] for v in gs.images.values())} images to {img_dir}")
        elif args.command == "evaluate":
            _record(run_dir, cfg, args)
            summary = evaluate_pipeline(
                cfg, _manifest(cfg), args.checkpoint, run_dir, cfg.train.seed,
                n=args.num_images,
            )
            print(json.dumps({k: summary[k] for k in ("variant", "k", "fid", "lpips_proxy")}))
        elif args.command == "decompose":
            _record(run_dir, cfg, args)
            batch = torch.stack(
                [load_image(p, cfg.data.image_size) for p in args.images]
            )
            paths = visualize_bands(batch, run_dir, prefix="decompose")
            print("\n".join(str(p) for p in paths))
        elif args.command == "sweep":
            _record(run_dir, cfg, args)
            table = shot_sweep(
                cfg, _manifest(cfg), args.out, args.run_id, k_values=args.k_values
            )
            print(f"sweep table: {table}")
        elif args.command == "ablate":
            _record(run_dir, cfg, args)
            table = ablation_pipeline(cfg, _manifest(cfg), args.out, args.run_id)
            print(f"ablation table: {table}")
        return 0
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
