"""Segmentation metrics for probability maps against binary ground truth.

Maps are 2-D float arrays in ``[0, 1]``; ground truth is binary. Measures
that are undefined for a frame (empty ground truth for sensitivity and the
weighted F-measure) return ``None`` and are counted as skips when a sequence
is aggregated.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from ._kernels import THRESHOLDS, threshold_counts

EPS = np.spacing(1)
METRIC_NAMES = ("dice", "f_mean", "f_weighted", "sensitivity", "s_measure", "e_mean")


def _check(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    if not np.isin(gt, (0, 1)).all():
        raise ValueError("ground truth must be binary")
    return pred, gt.astype(bool)


def binarize(pred: np.ndarray, threshold: float) -> np.ndarray:
    """Foreground where ``pred > threshold``; at a threshold of 1 the test is ``>= 1``.

    The inclusive case keeps an all-ones (or bright, clamped) map from
    binarizing to nothing, which is what makes the adaptive F1 agree with
    Dice on binary inputs.
    """
    pred = np.asarray(pred, dtype=np.float64)
    if threshold >= 1.0:
        return pred >= 1.0
    return pred > threshold


# ---------------------------------------------------------------- counting

def _counts(pred_bin, gt):
    p = np.asarray(pred_bin, dtype=bool)
    g = np.asarray(gt, dtype=bool)
    tp = int(np.count_nonzero(p & g))
    return tp, int(np.count_nonzero(p)) - tp, int(np.count_nonzero(g)) - tp


def dice(pred_bin: np.ndarray, gt: np.ndarray) -> float:
    """``2|P & G| / (|P| + |G|)``; 1 when both are empty."""
    tp, fp, fn = _counts(pred_bin, gt)
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2.0 * tp / denom


def precision(pred_bin: np.ndarray, gt: np.ndarray) -> float | None:
    tp, fp, _ = _counts(pred_bin, gt)
    return None if tp + fp == 0 else tp / (tp + fp)


def recall(pred_bin: np.ndarray, gt: np.ndarray) -> float | None:
    tp, _, fn = _counts(pred_bin, gt)
    return None if tp + fn == 0 else tp / (tp + fn)


def sensitivity(pred_bin: np.ndarray, gt: np.ndarray) -> float | None:
    """Recall of the foreground; ``None`` (skip) when ``gt`` is empty."""
    return recall(pred_bin, gt)


def adaptive_threshold(pred: np.ndarray) -> float:
    return float(min(2.0 * np.mean(pred), 1.0))


def _f_beta(p: float, r: float, beta_sq: float) -> float:
    if p == 0 and r == 0:
        return 0.0
    return (1 + beta_sq) * p * r / (beta_sq * p + r)


def f_measure_mean(pred: np.ndarray, gt: np.ndarray, beta_sq: float = 0.3) -> float:
    """F-measure after binarizing at the adaptive threshold."""
    pred, gt = _check(pred, gt)
    b = binarize(pred, adaptive_threshold(pred))
    tp, fp, fn = _counts(b, gt)
    if tp + fp == 0 and tp + fn == 0:
        return 1.0
    if tp == 0:
        return 0.0
    return _f_beta(tp / (tp + fp), tp / (tp + fn), beta_sq)


# ---------------------------------------------------------------- weighted F

def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = size // 2
    ax = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * sigma * sigma))
    return k / k.sum()


def f_measure_weighted(pred: np.ndarray, gt: np.ndarray, beta_sq: float = 1.0,
                       sigma: float = 5.0, ksize: int = 7) -> float | None:
    """Weighted F-measure; ``None`` when ``gt`` has no foreground.

    Background errors are replaced by the error at the nearest foreground
    pixel before Gaussian smoothing, foreground errors are capped by their
    smoothed value, and background errors are up-weighted with distance from
    the object.
    """
    pred, gt = _check(pred, gt)
    if not gt.any():
        return None
    err = np.abs(pred - gt)
    dist, (iy, ix) = ndimage.distance_transform_edt(~gt, return_indices=True)
    spread = err[iy, ix]
    smoothed = ndimage.correlate(spread, _gaussian_kernel(ksize, sigma), mode="constant", cval=0.0)
    capped = np.where(gt & (smoothed < err), smoothed, err)
    weight = np.where(gt, 1.0, 2.0 - np.exp(np.log(0.5) / 5.0 * dist))
    ew = capped * weight
    n_fg = np.count_nonzero(gt)
    tpw = n_fg - ew[gt].sum()
    fpw = ew[~gt].sum()
    r = 1.0 - ew[gt].mean()
    p = tpw / (EPS + tpw + fpw)
    return float((1 + beta_sq) * r * p / (EPS + r + beta_sq * p))


# ---------------------------------------------------------------- S-measure

def _object_score(vals: np.ndarray) -> float:
    m = vals.mean()
    sd = vals.std(ddof=1) if vals.size > 1 else 0.0
    return 2.0 * m / (m * m + 1.0 + sd + EPS)


def _ssim(p: np.ndarray, g: np.ndarray) -> float:
    k = p.size
    mx, my = p.mean(), g.mean()
    dp, dg = p - mx, g - my
    sx = (dp * dp).sum() / (k - 1 + EPS)
    sy = (dg * dg).sum() / (k - 1 + EPS)
    sxy = (dp * dg).sum() / (k - 1 + EPS)
    a = 4 * mx * my * sxy
    b = (mx * mx + my * my) * (sx + sy)
    if a != 0:
        return a / (b + EPS)
    return 1.0 if b == 0 else 0.0


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    """Structure measure: ``alpha * object + (1 - alpha) * region``, floored at 0."""
    pred, gt = _check(pred, gt)
    frac = gt.mean()
    if frac == 0:
        return float(1.0 - pred.mean())
    if frac == 1:
        return float(pred.mean())
    s_obj = frac * _object_score(pred[gt]) + (1 - frac) * _object_score(1.0 - pred[~gt])

    h, w = gt.shape
    ys, xs = np.nonzero(gt)
    # split index is the 1-based rounded centroid: rows/cols [0, c) go top/left
    cy = _round_half_up(ys.mean()) + 1
    cx = _round_half_up(xs.mean()) + 1
    g = gt.astype(np.float64)
    s_reg = 0.0
    for rs in (slice(0, cy), slice(cy, h)):
        for cs in (slice(0, cx), slice(cx, w)):
            pb = pred[rs, cs]
            if pb.size:
                s_reg += pb.size / gt.size * _ssim(pb.ravel(), g[rs, cs].ravel())
    return float(max(0.0, alpha * s_obj + (1 - alpha) * s_reg))


# ---------------------------------------------------------------- E-measure

def _e_from_counts(tp: np.ndarray, pp: np.ndarray, n_fg: int, n: int) -> np.ndarray:
    """Per-threshold enhanced alignment from confusion counts.

    With both maps binary, the alignment term takes one value per
    (prediction, truth) combination, so the pixel sum is a weighted sum of
    four terms.
    """
    tp = tp.astype(np.float64)
    pp = pp.astype(np.float64)
    if n_fg == 0:
        return (n - pp) / n
    if n_fg == n:
        return pp / n
    mb = pp / n
    mg = n_fg / n
    total = np.zeros_like(mb)
    for b, g, cnt in ((1.0, 1.0, tp), (1.0, 0.0, pp - tp), (0.0, 1.0, n_fg - tp),
                      (0.0, 0.0, n - pp - n_fg + tp)):
        fp = b - mb
        fg = g - mg
        xi = 2 * fp * fg / (fp * fp + fg * fg + EPS)
        total += cnt * (1 + xi) ** 2 / 4
    return total / n


def e_measure_curve(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    pred, gt = _check(pred, gt)
    tp, pp = threshold_counts(pred, gt)
    return _e_from_counts(tp, pp, int(gt.sum()), gt.size)


def e_measure_mean(pred: np.ndarray, gt: np.ndarray) -> float:
    """Enhanced-alignment measure averaged over the 256 thresholds ``k/255``."""
    return float(e_measure_curve(pred, gt).mean())


# ---------------------------------------------------------------- curves

@dataclass
class Curves:
    threshold: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f: np.ndarray
    e: np.ndarray

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["threshold", "precision", "recall", "f", "e"])
            for row in zip(self.threshold, self.precision, self.recall, self.f, self.e):
                wr.writerow([repr(float(v)) for v in row])


def pair_curves(pred: np.ndarray, gt: np.ndarray, beta_sq: float = 0.3) -> Curves:
    """Threshold sweep for one map.

    Where nothing is predicted precision is 0; with empty ground truth recall
    is 1 (nothing was missed).
    """
    pred, gt = _check(pred, gt)
    tp, pp = threshold_counts(pred, gt)
    n_fg = int(gt.sum())
    tpf = tp.astype(np.float64)
    prec = np.divide(tpf, pp, out=np.zeros_like(tpf), where=pp > 0)
    rec = tpf / n_fg if n_fg else np.ones_like(tpf)
    denom = beta_sq * prec + rec
    f = np.divide((1 + beta_sq) * prec * rec, denom, out=np.zeros_like(tpf), where=denom > 0)
    e = _e_from_counts(tp, pp, n_fg, gt.size)
    return Curves(THRESHOLDS.copy(), prec, rec, f, e)


def curves(pairs: Iterable[tuple[np.ndarray, np.ndarray]], beta_sq: float = 0.3) -> Curves:
    """Curves averaged over all (prediction, ground truth) pairs."""
    acc = None
    n = 0
    for pred, gt in pairs:
        c = pair_curves(pred, gt, beta_sq)
        if acc is None:
            acc = [c.precision.copy(), c.recall.copy(), c.f.copy(), c.e.copy()]
        else:
            for a, v in zip(acc, (c.precision, c.recall, c.f, c.e)):
                a += v
        n += 1
    if n == 0:
        raise ValueError("curves need at least one pair")
    return Curves(THRESHOLDS.copy(), *(a / n for a in acc))


# ---------------------------------------------------------------- aggregation

@dataclass
class FrameMetrics:
    clip_id: str
    frame_idx: int
    dice: float
    f_mean: float
    f_weighted: float | None
    sensitivity: float | None
    s_measure: float
    e_mean: float

    def values(self) -> dict[str, float | None]:
        return {k: getattr(self, k) for k in METRIC_NAMES}


def frame_metrics(pred: np.ndarray, gt: np.ndarray, clip_id: str = "", frame_idx: int = 0,
                  adaptive_dice: bool = False, alpha: float = 0.5, beta_sq_mean: float = 0.3,
                  beta_sq_weighted: float = 1.0) -> FrameMetrics:
    pred, gt = _check(pred, gt)
    thr = adaptive_threshold(pred) if adaptive_dice else 0.5
    b = binarize(pred, thr)
    return FrameMetrics(
        clip_id=clip_id,
        frame_idx=frame_idx,
        dice=dice(b, gt),
        f_mean=f_measure_mean(pred, gt, beta_sq_mean),
        f_weighted=f_measure_weighted(pred, gt, beta_sq_weighted),
        sensitivity=sensitivity(b, gt),
        s_measure=s_measure(pred, gt, alpha),
        e_mean=e_measure_mean(pred, gt),
    )


@dataclass
class MetricReport:
    dice: float
    f_mean: float
    f_weighted: float
    sensitivity: float
    s_measure: float
    e_mean: float
    n_frames: int
    skipped: dict[str, int] = field(default_factory=dict)
    curves: Curves | None = None
    frames: list[FrameMetrics] = field(default_factory=list)

    def values(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in METRIC_NAMES}


def aggregate(frames: Sequence[FrameMetrics], curve: Curves | None = None) -> MetricReport:
    """Mean of each metric over frames where it is defined.

    A metric skipped on every frame is reported as NaN, with the skip count
    equal to the frame count.
    """
    means: dict[str, float] = {}
    skipped: dict[str, int] = {}
    for name in METRIC_NAMES:
        vals = [getattr(f, name) for f in frames]
        kept = [v for v in vals if v is not None]
        skipped[name] = len(vals) - len(kept)
        means[name] = float(np.mean(kept)) if kept else float("nan")
    return MetricReport(**means, n_frames=len(frames), skipped=skipped, curves=curve,
                        frames=list(frames))


def evaluate_sequence(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray], clip_id: str = "",
                      adaptive_dice: bool = False, with_curves: bool = True) -> MetricReport:
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground-truth maps")
    frames = [frame_metrics(p, g, clip_id, i, adaptive_dice) for i, (p, g) in enumerate(zip(preds, gts))]
    curve = curves(zip(preds, gts)) if with_curves and frames else None
    return aggregate(frames, curve)


FRAME_COLUMNS = ("clip_id", "frame_idx") + METRIC_NAMES


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_frame_csv(path: str | Path, frames: Iterable[FrameMetrics]) -> None:
    """Per-frame metrics; skipped values are written as empty cells."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(FRAME_COLUMNS)
        for f in frames:
            wr.writerow([_cell(getattr(f, c)) for c in FRAME_COLUMNS])


def read_frame_csv(path: str | Path) -> list[FrameMetrics]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            vals = {k: (float(row[k]) if row[k] != "" else None) for k in METRIC_NAMES}
            out.append(FrameMetrics(clip_id=row["clip_id"], frame_idx=int(row["frame_idx"]), **vals))
    return out
