"""Frame-level prediction over whole clips and metric/CSV/PNG emission."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from . import metrics as M
from . import tensor as T
from .data import SamplerConfig, VideoClip, collate, sample_pairs
from .model import MAST


def quantize(prob: np.ndarray) -> np.ndarray:
    """Probabilities to 8-bit levels, rounding half up."""
    return np.floor(np.clip(prob, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def predict_clip(model: MAST, clip: VideoClip, delta: int, batch_size: int = 8) -> list[np.ndarray]:
    """8-bit probability map for every frame of ``clip``.

    Frames ``t >= delta`` are predicted as anchors of ``(t, t - delta)``; the
    first ``delta`` frames only ever appear as references, so theirs come
    from the reference branch of ``(t + delta, t)``.
    """
    pairs = sample_pairs(clip, SamplerConfig(delta=delta, shuffle=False))
    if not pairs:
        return []
    out: list[np.ndarray | None] = [None] * len(clip)
    with T.no_grad():
        for i in range(0, len(pairs), batch_size):
            chunk = pairs[i:i + batch_size]
            b = collate(chunk)
            pa, pr = model(b.anchors, b.references)
            prob_a = T.sigmoid(pa.final).data[:, 0]
            prob_r = T.sigmoid(pr.final).data[:, 0]
            for j, p in enumerate(chunk):
                out[p.t_anchor] = quantize(prob_a[j])
                if p.t_reference < delta:
                    out[p.t_reference] = quantize(prob_r[j])
    return out  # type: ignore[return-value]


@dataclass
class Evaluation:
    frames: list[M.FrameMetrics]
    per_clip: dict[str, M.MetricReport]
    overall: M.MetricReport


def evaluate_clips(model: MAST, clips: Sequence[VideoClip], delta: int, batch_size: int = 8,
                   with_curves: bool = True, png_dir: str | Path | None = None) -> Evaluation:
    """Metrics computed on the 8-bit maps, exactly as they would be read back from PNG."""
    frames: list[M.FrameMetrics] = []
    per_clip = {}
    all_pairs = []
    for clip in clips:
        maps = predict_clip(model, clip, delta, batch_size)
        if not maps:
            continue
        if png_dir is not None:
            save_pngs(Path(png_dir) / clip.clip_id, maps)
        preds = [m.astype(np.float64) / 255.0 for m in maps]
        clip_frames = [M.frame_metrics(p, g, clip.clip_id, i) for i, (p, g) in enumerate(zip(preds, clip.masks))]
        frames.extend(clip_frames)
        per_clip[clip.clip_id] = M.aggregate(clip_frames)
        if with_curves:
            all_pairs.extend(zip(preds, clip.masks))
    curve = M.curves(all_pairs) if with_curves and all_pairs else None
    return Evaluation(frames, per_clip, M.aggregate(frames, curve))


def mean_dice(model: MAST, clips: Sequence[VideoClip], delta: int, batch_size: int = 8) -> float:
    """Held-out Dice at the 0.5 cut, averaged over frames; the training monitor."""
    vals = []
    for clip in clips:
        for m, g in zip(predict_clip(model, clip, delta, batch_size), clip.masks):
            vals.append(M.dice(M.binarize(m / 255.0, 0.5), g))
    return float(np.mean(vals)) if vals else float("nan")


def save_pngs(directory: Path, maps: Sequence[np.ndarray]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(maps):
        Image.fromarray(m, "L").save(directory / f"{i:04d}.png")


def load_png_map(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")).astype(np.float64) / 255.0


def write_reports(ev: Evaluation, out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    M.write_frame_csv(out / "frames.csv", ev.frames)
    with open(out / "clips.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(("clip_id", "n_frames") + M.METRIC_NAMES)
        for cid, rep in ev.per_clip.items():
            wr.writerow([cid, rep.n_frames] + [repr(float(v)) for v in rep.values().values()])
        rep = ev.overall
        wr.writerow(["ALL", rep.n_frames] + [repr(float(v)) for v in rep.values().values()])
    with open(out / "skips.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(("metric", "skipped_frames"))
        for k, v in ev.overall.skipped.items():
            wr.writerow([k, v])
    if ev.overall.curves is not None:
        ev.overall.curves.to_csv(out / "curves.csv")
