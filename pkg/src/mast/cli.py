"""Command-line entry point: ``mast {train,eval,predict,ablate,gen-data,count}``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from .ablate import AXES, ablate, count_params_flops, summarize
from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, load_config, with_overrides
from .data import DataError, export_clip, load_dataset, resize_clip, synthetic_dataset
from .evaluate import evaluate_clips, predict_clip, save_pngs, write_reports
from .train import NumericalAbort, load_data, load_trained, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("mast")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat TOML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lam", type=float, help="mixture weight between mutual and self terms")
    p.add_argument("--delta", type=int, help="frame gap between anchor and reference")
    p.add_argument("--no-siamese", action="store_true", help="independent encoders for the two frames")
    p.add_argument("--no-mixture-attention", action="store_true", help="pass top features through unchanged")
    p.add_argument("--out", type=str, help="run directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mast", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    _common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--resume", action="store_true", help="continue from <out>/last")

    p = sub.add_parser("eval", help="metrics for a checkpoint on the held-out clips")
    _common(p)
    p.add_argument("--checkpoint", type=Path, help="defaults to <out>/best")
    p.add_argument("--png", action="store_true", help="also write prediction PNGs")

    p = sub.add_parser("predict", help="write prediction PNGs for every clip under a dataset root")
    _common(p)
    p.add_argument("--checkpoint", type=Path, help="defaults to <out>/best")
    p.add_argument("--data", type=Path, required=True)

    p = sub.add_parser("ablate", help="train and score an ablation grid")
    _common(p)
    p.add_argument("--axis", choices=AXES, required=True)
    p.add_argument("--seeds", type=int, nargs="+")

    p = sub.add_parser("gen-data", help="export synthetic clips in the Frame/GT layout")
    _common(p)
    p.add_argument("--n-clips", type=int, default=4)
    p.add_argument("--n-frames", type=int, default=30)
    p.add_argument("--difficulty", choices=("easy", "hard"), default="easy")
    p.add_argument("--split", default="train")

    p = sub.add_parser("count", help="parameter and flop counts for the configured model")
    _common(p)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    cfg = with_overrides(cfg, seed=args.seed, lam=args.lam, delta=args.delta, out=args.out,
                         epochs=getattr(args, "epochs", None))
    if args.no_siamese:
        cfg = replace(cfg, siamese=False)
    if args.no_mixture_attention:
        cfg = replace(cfg, mixture_attention=False)
    cfg.validate()
    return cfg


def _run(args) -> int:
    cfg = resolve_config(args)
    out = Path(cfg.out)
    if args.command == "train":
        res = train(cfg, resume=args.resume)
        print(f"best eval dice {res.best_dice:.4f} at epoch {res.best_epoch}; run in {out}")
    elif args.command == "eval":
        model = load_trained(cfg, args.checkpoint or out / "best")
        _, held = load_data(cfg)
        ev = evaluate_clips(model, held, cfg.delta, png_dir=out / "eval" / "png" if args.png else None)
        write_reports(ev, out / "eval")
        for k, v in ev.overall.values().items():
            print(f"{k:12s} {v:.4f}")
    elif args.command == "predict":
        model = load_trained(cfg, args.checkpoint or out / "best")
        size = (cfg.resolution, cfg.resolution)
        for clip in load_dataset(args.data):
            save_pngs(out / "pred" / clip.clip_id, predict_clip(model, resize_clip(clip, size), cfg.delta))
        print(f"predictions in {out / 'pred'}")
    elif args.command == "ablate":
        rows = ablate(cfg, args.axis, args.seeds, out)
        for r in summarize(rows):
            print(f"{r['setting']:22s} S {r['s_measure']:.4f}  Dice {r['dice']:.4f}  Sen {r['sensitivity']:.4f}")
    elif args.command == "gen-data":
        size = (cfg.resolution, cfg.resolution)
        for clip in synthetic_dataset(cfg.seed, args.n_clips, args.n_frames, size, args.difficulty, args.split):
            export_clip(clip, out)
        print(f"{args.n_clips} clips written to {out}")
    elif args.command == "count":
        params, flops = count_params_flops(cfg)
        print(f"params {params}")
        print(f"flops  {flops}  ({flops / 1e6:.2f} MFLOPs per frame pair)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return _run(args)
    except (ConfigError, CheckpointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        for k, v in exc.diagnostics.items():
            if k != "grad_norms":
                print(f"  {k}: {v}", file=sys.stderr)
        norms = exc.diagnostics.get("grad_norms", {})
        # non-finite norms sort first; they are the interesting ones
        ranked = sorted(norms.items(), key=lambda kv: -kv[1] if math.isfinite(kv[1]) else -math.inf)
        for name, v in ranked[:5]:
            print(f"  grad norm {name}: {v}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
