"""Weight-shared pyramid transformer over (anchor, reference) frame pairs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .nn import Conv2d, LayerNorm, Linear, Module
from .tensor import Tensor


@dataclass
class FramePair:
    """Anchor frame at ``t_anchor`` and the reference frame ``delta`` steps earlier."""

    anchor: np.ndarray
    reference: np.ndarray
    anchor_mask: np.ndarray
    reference_mask: np.ndarray
    t_anchor: int
    t_reference: int
    clip_id: str = ""

    def __post_init__(self):
        if self.anchor.shape != self.reference.shape:
            raise ValueError(f"frame shapes differ: {self.anchor.shape} vs {self.reference.shape}")
        for m in (self.anchor_mask, self.reference_mask):
            if m.shape != (1,) + self.anchor.shape[1:]:
                raise ValueError(f"mask shape {m.shape} does not match frame {self.anchor.shape}")
            if not np.isin(m, (0, 1)).all():
                raise ValueError("masks must contain only 0 and 1")

    @property
    def delta(self) -> int:
        return self.t_anchor - self.t_reference


def batch_form(pair: FramePair) -> Tensor:
    """Stack a pair into ``(2, 3, H, W)``: index 0 is the anchor, 1 the reference."""
    return Tensor(np.stack([pair.anchor, pair.reference]))


def batch_form_many(anchors: np.ndarray, references: np.ndarray) -> Tensor:
    """``(B, 3, H, W)`` anchors and references -> ``(2B, 3, H, W)``, anchors first."""
    if anchors.shape != references.shape:
        raise ValueError(f"frame shapes differ: {anchors.shape} vs {references.shape}")
    return Tensor(np.concatenate([anchors, references], axis=0))


def batch_split(feat: Tensor) -> tuple[Tensor, Tensor]:
    """Inverse of :func:`batch_form`: returns (anchor part, reference part)."""
    n = feat.shape[0]
    if n % 2 or n == 0:
        raise ValueError(f"batch split needs an even leading extent, got {n}")
    return T.split(feat, 0, n // 2)


# --------------------------------------------------------------------------
# pyramid transformer
# --------------------------------------------------------------------------

def window_partition(x: Tensor, ws: int) -> Tensor:
    n, h, w, c = x.shape
    x = T.reshape(x, (n, h // ws, ws, w // ws, ws, c))
    x = T.transpose(x, (0, 1, 3, 2, 4, 5))
    return T.reshape(x, (n * (h // ws) * (w // ws), ws * ws, c))


def window_merge(x: Tensor, ws: int, n: int, h: int, w: int) -> Tensor:
    c = x.shape[-1]
    x = T.reshape(x, (n, h // ws, w // ws, ws, ws, c))
    x = T.transpose(x, (0, 1, 3, 2, 4, 5))
    return T.reshape(x, (n, h, w, c))


class AttentionBlock(Module):
    """Pre-norm windowed self-attention plus MLP on ``(N, H, W, C)`` tokens."""

    def __init__(self, rng, dim: int, window: int, mlp_ratio: int = 2):
        self.norm1 = LayerNorm(dim)
        self.qkv = Linear(rng, dim, 3 * dim)
        self.proj = Linear(rng, dim, dim)
        self.norm2 = LayerNorm(dim)
        self.fc1 = Linear(rng, dim, mlp_ratio * dim)
        self.fc2 = Linear(rng, mlp_ratio * dim, dim)
        self.dim = dim
        self.window = window

    def __call__(self, x: Tensor) -> Tensor:
        n, h, w, c = x.shape
        ws = min(self.window, h, w)
        if h % ws or w % ws:
            raise ValueError(f"window {ws} does not tile a {h}x{w} token grid")
        win = window_partition(self.norm1(x), ws)
        qkv = self.qkv(win)
        q, kv = T.split(qkv, -1, c)
        k, v = T.split(kv, -1, c)
        att = T.softmax(T.matmul(q, T.transpose(k, (0, 2, 1))) * (c ** -0.5), -1)
        out = self.proj(T.matmul(att, v))
        x = x + window_merge(out, ws, n, h, w)
        return x + self.fc2(T.gelu(self.fc1(self.norm2(x))))


class Stage(Module):
    def __init__(self, rng, cin: int, cout: int, depth: int, window: int, mlp_ratio: int):
        self.merge = Conv2d(rng, cin, cout, 3, stride=2, padding=1)
        self.norm = LayerNorm(cout)
        self.blocks = [AttentionBlock(rng, cout, window, mlp_ratio) for _ in range(depth)]

    def __call__(self, x: Tensor) -> Tensor:
        x = T.transpose(self.merge(x), (0, 2, 3, 1))
        x = self.norm(x)
        for blk in self.blocks:
            x = blk(x)
        return T.transpose(x, (0, 3, 1, 2))


class PyramidTransformer(Module):
    """Three stride-2 stages; returns one side-out per stage, finest first."""

    def __init__(self, rng, dims: Sequence[int] = (16, 32, 64), depths: Sequence[int] = (1, 1, 1),
                 window: int = 4, mlp_ratio: int = 2, in_channels: int = 3):
        chans = [in_channels, *dims]
        self.stages = [Stage(rng, chans[i], chans[i + 1], depths[i], window, mlp_ratio)
                       for i in range(len(dims))]

    @property
    def total_stride(self) -> int:
        return 2 ** len(self.stages)

    def __call__(self, x: Tensor) -> list[Tensor]:
        h, w = x.shape[-2:]
        s = self.total_stride
        if h % s or w % s:
            raise ValueError(f"input {h}x{w} is not divisible by the total stride {s}")
        outs = []
        for stage in self.stages:
            x = stage(x)
            outs.append(x)
        return outs


class TEM(Module):
    """Texture enhancement: four dilated branches, 1x1 fuse, 1x1 shortcut, relu."""

    def __init__(self, rng, cin: int, cout: int = 32):
        self.b0 = Conv2d(rng, cin, cout, 1)
        self.b1 = [Conv2d(rng, cin, cout, 1), Conv2d(rng, cout, cout, 3, dilation=1)]
        self.b2 = [Conv2d(rng, cin, cout, 1), Conv2d(rng, cout, cout, 3, dilation=3)]
        self.b3 = [Conv2d(rng, cin, cout, 1), Conv2d(rng, cout, cout, 3, dilation=5)]
        self.fuse = Conv2d(rng, 4 * cout, cout, 1)
        self.shortcut = Conv2d(rng, cin, cout, 1)

    def __call__(self, f: Tensor) -> Tensor:
        branches = [self.b0(f)]
        for reduce, dilated in (self.b1, self.b2, self.b3):
            branches.append(dilated(reduce(f)))
        return T.relu(self.fuse(T.concat(branches, 1)) + self.shortcut(f))


class SiameseEncoder(Module):
    """Pyramid transformer plus TEM on the coarsest side-out.

    One instance encodes both frames of a pair in a single batch.
    """

    def __init__(self, rng, dims=(16, 32, 64), depths=(1, 1, 1), window: int = 4,
                 mlp_ratio: int = 2, channels: int = 32):
        self.transformer = PyramidTransformer(rng, dims, depths, window, mlp_ratio)
        self.tem = TEM(rng, dims[-1], channels)

    def __call__(self, batch: Tensor) -> tuple[list[Tensor], Tensor]:
        levels = self.transformer(batch)
        return levels, self.tem(levels[-1])
