"""Training loop, run log, and checkpoint/resume."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig
from .data import (DataError, SamplerConfig, VideoClip, augment, batches, load_dataset, resize_clip,
                   sample_dataset, synthetic_dataset)
from .decoder import total_loss
from .evaluate import mean_dice
from .model import MAST
from .optim import Adam, step_decay
from .rng import substream

log = logging.getLogger(__name__)

RUNLOG = "runlog.jsonl"
TIMING = "timing.jsonl"


class NumericalAbort(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class TrainResult:
    out: Path
    records: list[dict] = field(default_factory=list)
    best_dice: float = -1.0
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def losses(self) -> list[float]:
        return [r["train_loss"] for r in self.records]


def load_data(cfg: RunConfig) -> tuple[list[VideoClip], list[VideoClip]]:
    """Training and held-out clips: from disk when roots are set, else synthetic."""
    size = (cfg.resolution, cfg.resolution)
    if cfg.data_root:
        train = [resize_clip(c, size) for c in load_dataset(cfg.data_root)]
        if not train:
            raise DataError(f"no clips under {cfg.data_root}")
        if cfg.eval_root:
            held = [resize_clip(c, size) for c in load_dataset(cfg.eval_root)]
        else:
            k = max(1, len(train) // 5)
            train, held = train[:-k], train[-k:]
        return train, held
    train = synthetic_dataset(cfg.seed, cfg.n_clips, cfg.n_frames, size, cfg.difficulty, "train")
    held = synthetic_dataset(cfg.seed, cfg.n_eval_clips, cfg.n_frames, size, cfg.difficulty, "eval")
    return train, held


def build_model(cfg: RunConfig) -> MAST:
    return MAST(cfg.model_config(), seed=cfg.seed)


def _meta(cfg: RunConfig, epoch: int, step: int, best_dice: float, best_epoch: int) -> dict:
    return {"config": json.loads(cfg.canonical()), "config_hash": cfg.hash(), "epoch": epoch,
            "step": step, "best_dice": best_dice, "best_epoch": best_epoch}


def _grad_norms(model: MAST) -> dict[str, float]:
    return {name: float(np.linalg.norm(p.grad)) if p.grad is not None else 0.0
            for name, p in model.named_parameters()}


def _abort(out: Path, message: str, diag: dict) -> NumericalAbort:
    (out / "abort.json").write_text(json.dumps(diag, indent=2, sort_keys=True, default=str) + "\n")
    return NumericalAbort(message, diag)


def train(cfg: RunConfig, clips: Sequence[VideoClip] | None = None,
          eval_clips: Sequence[VideoClip] | None = None, resume: bool = False,
          on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Train from scratch (or from ``<out>/last`` with ``resume``).

    Writes ``runlog.jsonl`` (deterministic), ``timing.jsonl`` (wall clock),
    and the ``best`` / ``last`` checkpoints under ``cfg.out``.
    """
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if clips is None or eval_clips is None:
        loaded_train, loaded_eval = load_data(cfg)
        clips = loaded_train if clips is None else clips
        eval_clips = loaded_eval if eval_clips is None else eval_clips

    model = build_model(cfg)
    opt = Adam(model.parameters(), lr=cfg.lr)
    result = TrainResult(out)
    start_epoch, step = 0, 0

    if resume and (out / "last").exists():
        params, meta, opt_arrays = load_checkpoint(out / "last")
        if meta["config_hash"] != cfg.hash():
            raise ConfigError(f"checkpoint config hash {meta['config_hash']} does not match {cfg.hash()}")
        model.load_state_dict(params)
        opt.load_state_arrays(opt_arrays)
        start_epoch, step = meta["epoch"] + 1, meta["step"]
        result.best_dice, result.best_epoch = meta["best_dice"], meta["best_epoch"]
        lines = (out / RUNLOG).read_text().splitlines()[:start_epoch]
        result.records = [json.loads(l) for l in lines]
        (out / RUNLOG).write_text("".join(l + "\n" for l in lines))
    else:
        for name in (RUNLOG, TIMING):
            (out / name).write_text("")
        (out / "config.toml").write_text(cfg.to_toml())

    sampler = SamplerConfig(delta=cfg.delta, seed=cfg.seed, batch_size=cfg.batch_size, shuffle=True)
    for epoch in range(start_epoch, cfg.epochs):
        t0 = time.perf_counter()
        opt.lr = step_decay(cfg.lr, epoch, cfg.lr_decay, cfg.lr_period)
        pairs = sample_dataset(clips, sampler, epoch)
        aug_rng = substream(cfg.seed, "augment", epoch)
        total, n_batches = 0.0, 0
        for batch in batches(pairs, cfg.batch_size):
            if cfg.augment:
                batch = augment(batch, aug_rng)
            preds_a, preds_r = model(batch.anchors, batch.references)
            loss = total_loss(preds_a, preds_r, batch.y_a, batch.y_r, cfg.weight_window)
            model.zero_grad()
            value = float(loss.data)
            diag = {"epoch": epoch, "step": step, "lr": opt.lr, "loss": value}
            if not np.isfinite(value):
                diag["grad_norms"] = _grad_norms(model)
                raise _abort(out, f"non-finite loss {value} at step {step}", diag)
            T.backward(loss)
            try:
                opt.step()
            except T.NonFiniteError as exc:
                diag["grad_norms"] = _grad_norms(model)
                raise _abort(out, f"{exc} at step {step}", diag) from exc
            total += value
            n_batches += 1
            step += 1

        dice = mean_dice(model, eval_clips, cfg.delta, 2 * cfg.batch_size)
        record = {"epoch": epoch, "lr": opt.lr, "train_loss": total / max(n_batches, 1),
                  "eval_dice": dice, "steps": step, "seed": cfg.seed, "config_hash": cfg.hash()}
        improved = dice > result.best_dice
        if improved:
            result.best_dice, result.best_epoch = dice, epoch
            save_checkpoint(out / "best", model.state_dict(),
                            _meta(cfg, epoch, step, result.best_dice, result.best_epoch))
        save_checkpoint(out / "last", model.state_dict(),
                        _meta(cfg, epoch, step, result.best_dice, result.best_epoch), opt.state_arrays())
        with open(out / RUNLOG, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        with open(out / TIMING, "a") as fh:
            fh.write(json.dumps({"epoch": epoch, "seconds": time.perf_counter() - t0}) + "\n")
        result.records.append(record)
        log.info("epoch %d lr %.2e loss %.4f eval dice %.4f (%.1fs)", epoch, opt.lr, record["train_loss"],
                 dice, time.perf_counter() - t0)
        if on_epoch is not None:
            on_epoch(record)
        if cfg.stop_dice > 0 and dice >= cfg.stop_dice:
            result.stopped_early = True
            break
    return result


def load_trained(cfg: RunConfig, checkpoint: str | Path) -> MAST:
    """Model restored from a checkpoint whose config hash must match ``cfg``."""
    params, meta, _ = load_checkpoint(checkpoint)
    if meta["config_hash"] != cfg.hash():
        raise ConfigError(f"checkpoint {checkpoint} was trained with config {meta['config_hash']}, "
                         f"current config is {cfg.hash()}")
    model = build_model(cfg)
    model.load_state_dict(params)
    return model
