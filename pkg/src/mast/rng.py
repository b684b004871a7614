"""Labeled PRNG substreams.

Every stochastic site asks for ``substream(seed, "label", ...)``; the label
path is hashed into the seed sequence, so two runs that share a seed draw the
same numbers at the same site no matter what else they do.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _label_words(parts) -> list[int]:
    text = "/".join(str(p) for p in parts).encode()
    digest = hashlib.sha256(text).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *_label_words(labels)])))
