"""Deeply supervised decoder and the weighted BCE + IoU objective."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .nn import Conv2d, Module
from .tensor import Tensor

N_MAPS = 4


@dataclass
class PredictionSet:
    """Four logit maps at input resolution, finest refinement first.

    ``maps[i]`` is the level-``i+1`` prediction; ``maps[3]`` is the coarse
    global map. ``coarse`` and ``residuals`` keep the pre-upsampling maps of
    the refinement chain (coarse to fine) for inspection.
    """

    maps: list[Tensor]
    coarse: list[Tensor] = field(default_factory=list)
    residuals: list[Tensor] = field(default_factory=list)

    def __post_init__(self):
        if len(self.maps) != N_MAPS:
            raise ValueError(f"expected {N_MAPS} maps, got {len(self.maps)}")

    @property
    def final(self) -> Tensor:
        return self.maps[0]


def _up(x: Tensor, like: Tensor) -> Tensor:
    return T.upsample_bilinear(x, like.shape[-2:])


class Decoder(Module):
    """Neighbor-connection fusion into a coarse map, then three reverse-attention refinements."""

    def __init__(self, rng, level_channels: Sequence[int] = (16, 32, 64), channels: int = 32,
                 width: int = 32):
        if len(level_channels) != 3:
            raise ValueError(f"decoder expects 3 pyramid levels, got {len(level_channels)}")
        self.reduce = [Conv2d(rng, c, width, 1) for c in level_channels]
        self.reduce_z = Conv2d(rng, channels, width, 1)
        self.ncd = [Conv2d(rng, width, width, 3) for _ in range(4)]
        self.ncd_cat = Conv2d(rng, 2 * width, width, 3)
        self.ncd_head = Conv2d(rng, width, 1, 1, std=0.02)
        self.gra = [[Conv2d(rng, width, width, 3), Conv2d(rng, width, 1, 3, std=0.02)] for _ in range(3)]
        self.level_channels = tuple(level_channels)

    def __call__(self, levels: Sequence[Tensor], z: Tensor, out_size: tuple[int, int]) -> PredictionSet:
        if len(levels) != len(self.level_channels):
            raise ValueError(f"decoder configured for {len(self.level_channels)} levels, got {len(levels)}")
        feats = [T.gelu(r(x)) for r, x in zip(self.reduce, levels)]
        zr = T.gelu(self.reduce_z(z))
        l1, l2, l3 = feats

        # neighbor connection over (z, l3, l2), coarse to fine
        x2 = T.gelu(self.ncd[0](_up(zr, l3))) * l3
        x3 = T.gelu(self.ncd[1](_up(zr, l2))) * T.gelu(self.ncd[2](_up(x2, l2))) * l2
        x3 = T.concat([x3, T.gelu(self.ncd[3](_up(x2, l2)))], 1)
        coarse = self.ncd_head(T.gelu(self.ncd_cat(x3)))

        chain = [coarse]
        residuals = []
        prev = coarse
        for (conv_a, conv_b), feat in zip(self.gra, (l3, l2, l1)):
            base = _up(prev, feat)
            rev = 1.0 - T.sigmoid(base)
            res = conv_b(T.gelu(conv_a(feat * rev)))
            prev = base + res
            residuals.append(res)
            chain.append(prev)

        maps = [T.upsample_bilinear(m, out_size) for m in reversed(chain)]
        return PredictionSet(maps=maps, coarse=chain, residuals=residuals)


# --------------------------------------------------------------------------
# loss
# --------------------------------------------------------------------------

def weight_map(y: np.ndarray, window: int = 7, gain: float = 5.0) -> np.ndarray:
    """``1 + gain * |boxavg(y) - y|`` with replicate padding; ``y`` is ``(B, 1, H, W)``."""
    y = np.asarray(y, dtype=np.float64)
    with T.no_grad():
        local = T.avgpool2d(Tensor(y), window, "replicate").data
    return 1.0 + gain * np.abs(local - y)


def _per_sample(x: Tensor) -> Tensor:
    return T.sum(x, axis=tuple(range(1, x.ndim)))


def weighted_bce(logits: Tensor, y: np.ndarray, w: np.ndarray) -> Tensor:
    """Batch mean of ``sum(w * bce) / sum(w)`` per sample."""
    w = np.asarray(w, dtype=np.float64)
    per = _per_sample(T.bce_with_logits(logits, y) * w) / w.sum(axis=tuple(range(1, w.ndim)))
    return T.mean(per)


def weighted_iou(logits: Tensor, y: np.ndarray, w: np.ndarray, eps: float = 1.0) -> Tensor:
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    p = T.sigmoid(logits)
    inter = _per_sample(p * (y * w))
    union = _per_sample(p * w) + (y * w).sum(axis=tuple(range(1, y.ndim))) - inter
    return T.mean(1.0 - (inter + eps) / (union + eps))


def hybrid_loss(logits: Tensor, y: np.ndarray, w: np.ndarray) -> Tensor:
    return weighted_bce(logits, y, w) + weighted_iou(logits, y, w)


def total_loss(preds_a: PredictionSet, preds_r: PredictionSet, y_a: np.ndarray, y_r: np.ndarray,
               window: int = 7, w_a: np.ndarray | None = None, w_r: np.ndarray | None = None) -> Tensor:
    """Sum of the hybrid loss over four maps and both frames."""
    w_a = weight_map(y_a, window) if w_a is None else w_a
    w_r = weight_map(y_r, window) if w_r is None else w_r
    total = None
    for la, lr in zip(preds_a.maps, preds_r.maps):
        term = hybrid_loss(la, y_a, w_a) + hybrid_loss(lr, y_r, w_r)
        total = term if total is None else total + term
    return total
