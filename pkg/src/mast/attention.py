"""Mixture attention between the top-level features of an anchor/reference pair.

Shapes below carry an optional leading batch axis ``B``. With patch size
``P`` over a ``C x H x W`` map there are ``N = HW / P^2`` patches and an
embedding is ``P^2 x NC``: row ``iy * P + ix`` is the position inside a patch,
column ``n * C + c`` is channel ``c`` of patch ``n`` (patches in raster order).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .nn import Conv2d, Module, param
from .tensor import Tensor

MUTUAL_MODES = ("literal", "transposed")


def patchify(f: Tensor, patch: int) -> Tensor:
    """``(B, C, H, W)`` -> ``(B, P, P, nh, nw, C)``."""
    b, c, h, w = f.shape
    if h % patch or w % patch:
        raise ValueError(f"patch size {patch} does not divide a {h}x{w} map")
    x = T.reshape(f, (b, c, h // patch, patch, w // patch, patch))
    return T.transpose(x, (0, 3, 5, 2, 4, 1))


def unpatchify(x: Tensor, channels: int, h: int, w: int, patch: int) -> Tensor:
    """Exact inverse layout of :func:`embed` (no projection): ``(B, P^2, NC)`` -> ``(B, C, H, W)``."""
    b = x.shape[0]
    x = T.reshape(x, (b, patch, patch, h // patch, w // patch, channels))
    x = T.transpose(x, (0, 5, 3, 1, 4, 2))
    return T.reshape(x, (b, channels, h, w))


def embed(f: Tensor, proj_weight: Tensor, proj_bias: Tensor | None, position: Tensor,
          patch: int) -> Tensor:
    """Patch embedding ``(B, P^2, NC)``.

    The square projection acts on the channel vector of every pixel in every
    flattened patch; ``position`` (``P^2 x NC``) is added afterwards.
    """
    b, c, h, w = f.shape
    x = patchify(f, patch)
    x = T.linear(x, proj_weight, proj_bias)
    x = T.reshape(x, (b, patch * patch, (h // patch) * (w // patch) * c))
    if position.shape != x.shape[1:]:
        raise ValueError(f"position embedding {position.shape} does not match {x.shape[1:]}")
    return x + position


@dataclass
class AttentionBundle:
    """Sub-blocks of ``A = [E_r, E_a]^T [E_a, E_r]``."""

    ra: Tensor
    rr: Tensor
    aa: Tensor
    ar: Tensor

    @property
    def full(self) -> Tensor:
        top = T.concat([self.ra, self.rr], -1)
        bottom = T.concat([self.aa, self.ar], -1)
        return T.concat([top, bottom], -2)


def _t(x: Tensor) -> Tensor:
    axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2)
    return T.transpose(x, axes)


def attention_matrix(e_a: Tensor, e_r: Tensor) -> AttentionBundle:
    if e_a.shape != e_r.shape:
        raise ValueError(f"embedding shapes differ: {e_a.shape} vs {e_r.shape}")
    er_t = _t(e_r)
    ra = T.matmul(er_t, e_a)
    # ar is assembled from ra, so ra == ar^T holds bit for bit
    return AttentionBundle(ra=ra, rr=T.matmul(er_t, e_r), aa=T.matmul(_t(e_a), e_a), ar=_t(ra))


@dataclass
class EnhancedEmbeddings:
    r_mutual: Tensor
    a_mutual: Tensor
    r_self: Tensor
    a_self: Tensor


def enhance(e_a: Tensor, e_r: Tensor, bundle: AttentionBundle, mutual: str = "literal") -> EnhancedEmbeddings:
    """Multiply each embedding by a column-softmaxed attention block.

    ``mutual="literal"`` uses ``A_ra`` for both mutual terms; ``"transposed"``
    uses ``A_ar`` for the anchor's, which makes the module exactly symmetric
    under swapping anchor and reference.
    """
    if mutual not in MUTUAL_MODES:
        raise ValueError(f"mutual mode must be one of {MUTUAL_MODES}, got {mutual!r}")
    s_ra = T.softmax(bundle.ra, -2)
    s_anchor = s_ra if mutual == "literal" else T.softmax(bundle.ar, -2)
    return EnhancedEmbeddings(
        r_mutual=T.matmul(e_r, s_ra),
        a_mutual=T.matmul(e_a, s_anchor),
        r_self=T.matmul(e_r, T.softmax(bundle.rr, -2)),
        a_self=T.matmul(e_a, T.softmax(bundle.aa, -2)),
    )


def fuse(enh: EnhancedEmbeddings, lam: float) -> tuple[Tensor, Tensor]:
    """``z_a = lam * E_r^(m) + (1 - lam) * E_a^(s)`` and the mirrored ``z_r``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    z_a = enh.r_mutual * lam + enh.a_self * (1.0 - lam)
    z_r = enh.a_mutual * lam + enh.r_self * (1.0 - lam)
    return z_a, z_r


def mixture_attention(f_a: Tensor, f_r: Tensor, proj_weight: Tensor, proj_bias: Tensor | None,
                      position: Tensor, lam: float, patch: int,
                      mutual: str = "literal") -> tuple[Tensor, Tensor]:
    """Embed, attend, enhance, fuse, and fold back to ``(B, C, H, W)`` maps."""
    if f_a.shape != f_r.shape:
        raise ValueError(f"feature shapes differ: {f_a.shape} vs {f_r.shape}")
    _, c, h, w = f_a.shape
    e_a = embed(f_a, proj_weight, proj_bias, position, patch)
    e_r = embed(f_r, proj_weight, proj_bias, position, patch)
    z_a, z_r = fuse(enhance(e_a, e_r, attention_matrix(e_a, e_r), mutual), lam)
    return unpatchify(z_a, c, h, w, patch), unpatchify(z_r, c, h, w, patch)


class MixtureAttention(Module):
    """Learned pieces around :func:`mixture_attention`.

    Holds the square embedding projection (identity at init), the position
    embedding (zero at init), and the 1x1 conv applied to the folded-back maps.
    """

    def __init__(self, rng, channels: int, height: int, width: int, patch: int,
                 lam: float = 0.7, mutual: str = "literal"):
        if height % patch or width % patch:
            raise ValueError(f"patch size {patch} does not divide a {height}x{width} map")
        n = (height // patch) * (width // patch)
        self.proj_weight = param(np.eye(channels))
        self.proj_bias = param(np.zeros(channels))
        self.position = param(np.zeros((patch * patch, n * channels)))
        self.out = Conv2d(rng, channels, channels, 1)
        self.patch = patch
        self.lam = lam
        self.mutual = mutual

    def __call__(self, f_a: Tensor, f_r: Tensor) -> tuple[Tensor, Tensor]:
        z_a, z_r = mixture_attention(f_a, f_r, self.proj_weight, self.proj_bias, self.position,
                                     self.lam, self.patch, self.mutual)
        # one conv call over both frames keeps the two outputs weight-tied
        both = self.out(T.concat([z_a, z_r], 0))
        return T.split(both, 0, f_a.shape[0])
