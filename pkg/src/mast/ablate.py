"""Ablation grids and model-size accounting."""
from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as T
from .config import RunConfig
from .data import VideoClip
from .evaluate import evaluate_clips
from .train import build_model, load_data, load_trained, train

COMPONENT_ROWS = (
    ("baseline", dict(siamese=False, mixture_attention=False)),
    ("+siamese", dict(siamese=True, mixture_attention=False)),
    ("+mixture_attention", dict(siamese=False, mixture_attention=True)),
    ("full", dict(siamese=True, mixture_attention=True)),
)
LAMBDA_GRID = (0.0, 0.3, 0.5, 0.7, 1.0)
DELTA_GRID = (1, 2, 3, 5)
AXES = ("components", "lambda", "delta")
TABLE_COLUMNS = ("axis", "setting", "seed", "s_measure", "dice", "sensitivity", "best_epoch")


def grid(axis: str, cfg: RunConfig) -> list[tuple[str, RunConfig]]:
    if axis == "components":
        return [(name, replace(cfg, **flags)) for name, flags in COMPONENT_ROWS]
    if axis == "lambda":
        return [(f"lambda={lam:g}", replace(cfg, lam=lam)) for lam in LAMBDA_GRID]
    if axis == "delta":
        return [(f"delta={d}", replace(cfg, delta=d)) for d in DELTA_GRID]
    raise ValueError(f"unknown ablation axis {axis!r}; choose from {AXES}")


def run_point(cfg: RunConfig, clips: Sequence[VideoClip], eval_clips: Sequence[VideoClip]) -> dict:
    """Train one configuration and score its best checkpoint on the held-out clips."""
    res = train(cfg, clips, eval_clips)
    model = load_trained(cfg, Path(cfg.out) / "best")
    rep = evaluate_clips(model, eval_clips, cfg.delta, 2 * cfg.batch_size, with_curves=False).overall
    return {"s_measure": rep.s_measure, "dice": rep.dice, "sensitivity": rep.sensitivity,
            "best_epoch": res.best_epoch}


def ablate(cfg: RunConfig, axis: str, seeds: Sequence[int] | None = None,
           out: str | Path | None = None) -> list[dict]:
    """Every grid point for every seed; all points of a seed share data and data order.

    Writes ``ablation_<axis>.csv`` with one row per (setting, seed) followed by
    per-setting means over seeds.
    """
    seeds = list(seeds) if seeds else [cfg.seed]
    out = Path(out or cfg.out)
    rows = []
    for seed in seeds:
        base = replace(cfg, seed=seed)
        clips, eval_clips = load_data(base)
        for label, point in grid(axis, base):
            point = replace(point, out=str(out / axis / label / f"seed{seed}"))
            point.validate()
            rows.append({"axis": axis, "setting": label, "seed": seed, **run_point(point, clips, eval_clips)})
    write_table(out / f"ablation_{axis}.csv", rows)
    return rows


def summarize(rows: Sequence[dict]) -> list[dict]:
    order = list(dict.fromkeys(r["setting"] for r in rows))
    out = []
    for label in order:
        sel = [r for r in rows if r["setting"] == label]
        out.append({"axis": sel[0]["axis"], "setting": label, "seed": "mean",
                    **{k: float(np.mean([r[k] for r in sel])) for k in ("s_measure", "dice", "sensitivity")},
                    "best_epoch": ""})
    return out


def write_table(path: Path, rows: Sequence[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        wr.writeheader()
        for r in list(rows) + summarize(rows):
            wr.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})


def count_params_flops(cfg: RunConfig) -> tuple[int, int]:
    """Parameter count and forward flops for one (anchor, reference) pair.

    Flops count the multiply-accumulates of every matmul, linear and
    convolution as two each; elementwise work and resampling are not counted.
    """
    model = build_model(cfg)
    x = np.zeros((1, 3, cfg.resolution, cfg.resolution))
    with T.no_grad(), T.count_flops() as counter:
        model(x, x)
    return model.num_parameters(), counter.flops
