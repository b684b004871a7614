"""Full network: encoder(s), optional mixture attention, shared decoder."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .attention import MixtureAttention
from .decoder import Decoder, PredictionSet
from .encoder import SiameseEncoder, batch_form_many, batch_split
from .nn import Module
from .rng import substream
from .tensor import Tensor


@dataclass(frozen=True)
class ModelConfig:
    resolution: int = 64
    dims: tuple[int, int, int] = (16, 32, 64)
    depths: tuple[int, int, int] = (1, 1, 1)
    window: int = 4
    mlp_ratio: int = 2
    channels: int = 32
    patch: int = 4
    lam: float = 0.7
    mutual: str = "literal"
    decoder_width: int = 32
    siamese: bool = True
    mixture_attention: bool = True

    @property
    def top_extent(self) -> int:
        return self.resolution // 2 ** len(self.dims)

    def validate(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.resolution % 2 ** len(self.dims):
            raise ValueError(f"resolution {self.resolution} not divisible by {2 ** len(self.dims)}")
        if self.top_extent % self.patch:
            raise ValueError(f"patch {self.patch} does not divide the {self.top_extent}px top level")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["depths"] = list(self.depths)
        return d


def _split_set(ps: PredictionSet, n: int) -> tuple[PredictionSet, PredictionSet]:
    a, r = zip(*(T.split(m, 0, n) for m in ps.maps))
    return PredictionSet(list(a)), PredictionSet(list(r))


class MAST(Module):
    def __init__(self, cfg: ModelConfig = ModelConfig(), seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        enc_kw = dict(dims=cfg.dims, depths=cfg.depths, window=cfg.window,
                      mlp_ratio=cfg.mlp_ratio, channels=cfg.channels)
        self.encoder = SiameseEncoder(substream(seed, "init", "encoder"), **enc_kw)
        self.encoder_ref = None
        if not cfg.siamese:
            self.encoder_ref = SiameseEncoder(substream(seed, "init", "encoder_ref"), **enc_kw)
        self.attention = None
        if cfg.mixture_attention:
            top = cfg.top_extent
            self.attention = MixtureAttention(substream(seed, "init", "attention"), cfg.channels,
                                              top, top, cfg.patch, cfg.lam, cfg.mutual)
        self.decoder = Decoder(substream(seed, "init", "decoder"), cfg.dims, cfg.channels,
                               cfg.decoder_width)

    def encode(self, anchors: np.ndarray, references: np.ndarray):
        """Returns combined (2B) pyramid levels plus split top features."""
        if self.encoder_ref is None:
            levels, top = self.encoder(batch_form_many(anchors, references))
            f_a, f_r = batch_split(top)
            return levels, f_a, f_r
        levels_a, f_a = self.encoder(Tensor(anchors))
        levels_r, f_r = self.encoder_ref(Tensor(references))
        levels = [T.concat([a, r], 0) for a, r in zip(levels_a, levels_r)]
        return levels, f_a, f_r

    def __call__(self, anchors: np.ndarray, references: np.ndarray) -> tuple[PredictionSet, PredictionSet]:
        anchors = np.asarray(anchors, dtype=np.float64)
        references = np.asarray(references, dtype=np.float64)
        levels, f_a, f_r = self.encode(anchors, references)
        if self.attention is not None:
            z_a, z_r = self.attention(f_a, f_r)
        else:
            z_a, z_r = f_a, f_r
        preds = self.decoder(levels, T.concat([z_a, z_r], 0), anchors.shape[-2:])
        return _split_set(preds, anchors.shape[0])
