"""Synthetic colonoscopy-like clips, on-disk clip datasets, and frame-pair sampling.

On disk a dataset is ``<root>/<clip_id>/Frame/*.{png,jpg}`` with a mask of the
same stem in ``<root>/<clip_id>/GT/*.png``.
"""
from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .encoder import FramePair
from .rng import substream

log = logging.getLogger(__name__)

FRAME_EXTS = (".png", ".jpg", ".jpeg")
DIFFICULTIES = ("easy", "hard")


class DataError(Exception):
    """Malformed dataset on disk or an unusable clip."""


class ShortClipWarning(UserWarning):
    pass


@dataclass
class Track:
    """Per-frame ellipse parameters of one synthetic object."""

    cy: np.ndarray
    cx: np.ndarray
    ay: np.ndarray
    ax: np.ndarray
    theta: np.ndarray


@dataclass
class VideoClip:
    clip_id: str
    frames: list[np.ndarray]          # (H, W, 3) uint8
    masks: list[np.ndarray]           # (H, W) uint8 in {0, 1}
    fps: float = 25.0
    tracks: list[Track] = field(default_factory=list)

    def __post_init__(self):
        if len(self.frames) != len(self.masks):
            raise DataError(f"{self.clip_id}: {len(self.frames)} frames but {len(self.masks)} masks")
        if self.frames:
            shape = self.frames[0].shape
            for i, (f, m) in enumerate(zip(self.frames, self.masks)):
                if f.shape != shape or m.shape != shape[:2]:
                    raise DataError(f"{self.clip_id}: frame {i} has extents {f.shape} / mask {m.shape}, "
                                    f"expected {shape}")
        self._chw: np.ndarray | None = None
        self._masks: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def extents(self) -> tuple[int, int]:
        return self.frames[0].shape[:2]

    def frame_array(self) -> np.ndarray:
        """All frames as ``(T, 3, H, W)`` floats in [0, 1] (cached)."""
        if self._chw is None:
            self._chw = np.stack(self.frames).transpose(0, 3, 1, 2).astype(np.float64) / 255.0
        return self._chw

    def mask_array(self) -> np.ndarray:
        """All masks as ``(T, 1, H, W)`` floats (cached)."""
        if self._masks is None:
            self._masks = np.stack(self.masks)[:, None].astype(np.float64)
        return self._masks


# --------------------------------------------------------------------------
# synthetic generation
# --------------------------------------------------------------------------

def value_noise(rng: np.random.Generator, shape: tuple[int, int], cells: int) -> np.ndarray:
    """Smooth noise in [0, 1]: a random ``cells x cells`` lattice, cubic-upsampled."""
    lattice = rng.random((cells + 3, cells + 3))
    zoom = (shape[0] / cells, shape[1] / cells)
    out = ndimage.zoom(lattice, zoom, order=3, mode="nearest")
    oy = int(round(zoom[0]))
    ox = int(round(zoom[1]))
    out = out[oy:oy + shape[0], ox:ox + shape[1]]
    lo, hi = out.min(), out.max()
    return (out - lo) / (hi - lo + 1e-12)


def ellipse_mask(h: int, w: int, cy: float, cx: float, ay: float, ax: float, theta: float) -> np.ndarray:
    """Pixels whose centres fall inside the rotated ellipse."""
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    c, s = np.cos(theta), np.sin(theta)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (u / ax) ** 2 + (v / ay) ** 2 <= 1.0


def _walk(rng, n: int, start: float, lo: float, hi: float, max_speed: float) -> np.ndarray:
    """Bounded random walk with momentum; steps never exceed ``max_speed``."""
    pos = np.empty(n)
    pos[0] = start
    vel = rng.uniform(-max_speed, max_speed) * 0.5
    for t in range(1, n):
        vel = 0.8 * vel + rng.normal(0.0, 0.35 * max_speed)
        vel = float(np.clip(vel, -max_speed, max_speed))
        nxt = pos[t - 1] + vel
        if nxt < lo or nxt > hi:
            vel = -vel
            nxt = float(np.clip(pos[t - 1] + vel, lo, hi))
        pos[t] = nxt
    return pos


def make_track(rng, n_frames: int, h: int, w: int, max_speed: float) -> Track:
    size = min(h, w)
    ay0 = rng.uniform(0.09, 0.17) * size
    ax0 = rng.uniform(0.09, 0.17) * size
    amp = 0.12
    margin_y = ay0 * (1 + amp) + 1
    margin_x = ax0 * (1 + amp) + 1
    margin = max(margin_y, margin_x)
    cy = _walk(rng, n_frames, rng.uniform(margin, h - 1 - margin), margin, h - 1 - margin, max_speed / np.sqrt(2))
    cx = _walk(rng, n_frames, rng.uniform(margin, w - 1 - margin), margin, w - 1 - margin, max_speed / np.sqrt(2))
    t = np.arange(n_frames)
    omega = rng.uniform(0.15, 0.4)
    phase = rng.uniform(0, 2 * np.pi, size=2)
    ay = ay0 * (1 + amp * np.sin(omega * t + phase[0]))
    ax = ax0 * (1 + amp * np.sin(omega * t + phase[1]))
    theta = rng.uniform(0, np.pi) + rng.uniform(-0.05, 0.05) * t
    return Track(cy, cx, ay, ax, theta)


def render_mask(tracks: Sequence[Track], t: int, h: int, w: int) -> np.ndarray:
    m = np.zeros((h, w), dtype=bool)
    for tr in tracks:
        m |= ellipse_mask(h, w, tr.cy[t], tr.cx[t], tr.ay[t], tr.ax[t], tr.theta[t])
    return m


_MUCOSA = np.array([0.78, 0.42, 0.36])
_MUCOSA_DARK = np.array([0.45, 0.16, 0.14])
_POLYP = np.array([0.92, 0.66, 0.52])


def generate_synthetic_clip(seed: int, n_frames: int = 30, extents: tuple[int, int] = (64, 64),
                            difficulty: str = "easy", max_speed: float = 2.0,
                            clip_id: str | None = None) -> VideoClip:
    """Deterministic clip of 1-2 moving, deforming ellipses over textured tissue."""
    h, w = extents
    if h < 16 or w < 16:
        raise ValueError(f"extents {extents} too small; need at least 16x16")
    if n_frames < 2:
        raise ValueError(f"need at least 2 frames, got {n_frames}")
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}, got {difficulty!r}")
    rng = substream(seed, "synthetic-clip")
    pad = int(np.ceil(max_speed * n_frames * 0.25)) + 2
    big = (h + 2 * pad, w + 2 * pad)
    tissue = 0.65 * value_noise(rng, big, 4) + 0.35 * value_noise(rng, big, 12)
    vessels = value_noise(rng, big, 20)
    drift_y = _walk(rng, n_frames, float(pad), 0.0, 2.0 * pad, 0.5)
    drift_x = _walk(rng, n_frames, float(pad), 0.0, 2.0 * pad, 0.5)

    n_obj = int(rng.integers(1, 3))
    tracks = [make_track(rng, n_frames, h, w, max_speed) for _ in range(n_obj)]
    contrast = 0.9 if difficulty == "easy" else 0.3
    polyp_tex = value_noise(rng, (h, w), 6)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    frames, masks = [], []
    for t in range(n_frames):
        oy, ox = int(round(drift_y[t])), int(round(drift_x[t]))
        base = tissue[oy:oy + h, ox:ox + w][..., None]
        img = _MUCOSA_DARK + (_MUCOSA - _MUCOSA_DARK) * base
        vein = vessels[oy:oy + h, ox:ox + w]
        img = img * (1 - 0.15 * (vein > 0.75)[..., None])

        mask = np.zeros((h, w), dtype=bool)
        for tr in tracks:
            m = ellipse_mask(h, w, tr.cy[t], tr.cx[t], tr.ay[t], tr.ax[t], tr.theta[t])
            r = np.sqrt((yy - tr.cy[t]) ** 2 + (xx - tr.cx[t]) ** 2) / max(tr.ay[t], tr.ax[t])
            shade = np.clip(1.05 - 0.35 * r, 0.0, 1.0)[..., None]
            colour = _POLYP * (0.85 + 0.15 * polyp_tex[..., None]) * shade
            a = contrast * m[..., None]
            img = (1 - a) * img + a * colour
            mask |= m
        img = img + rng.normal(0.0, 0.02, size=img.shape)
        frames.append(np.clip(np.round(img * 255), 0, 255).astype(np.uint8))
        masks.append(mask.astype(np.uint8))
    return VideoClip(clip_id or f"syn{seed}", frames, masks, 25.0, tracks)


def synthetic_dataset(seed: int, n_clips: int, n_frames: int = 30, extents=(64, 64),
                      difficulty: str = "easy", split: str = "train") -> list[VideoClip]:
    """``n_clips`` clips whose seeds come from the ``(seed, split)`` substream."""
    seeds = substream(seed, "synthetic-dataset", split).integers(0, 2**62, size=n_clips)
    return [generate_synthetic_clip(int(s), n_frames, extents, difficulty, clip_id=f"{split}_{i:03d}")
            for i, s in enumerate(seeds)]


# --------------------------------------------------------------------------
# disk layout
# --------------------------------------------------------------------------

def natural_key(name: str):
    return [int(tok) if tok.isdigit() else tok.lower() for tok in re.split(r"(\d+)", name)]


def export_clip(clip: VideoClip, root: str | Path) -> Path:
    d = Path(root) / clip.clip_id
    (d / "Frame").mkdir(parents=True, exist_ok=True)
    (d / "GT").mkdir(parents=True, exist_ok=True)
    for i, (f, m) in enumerate(zip(clip.frames, clip.masks)):
        name = f"{clip.clip_id}_{i}.png"
        Image.fromarray(f, "RGB").save(d / "Frame" / name)
        Image.fromarray((m * 255).astype(np.uint8), "L").save(d / "GT" / name)
    return d


def _read(path: Path, mode: str) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert(mode))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def load_clip(clip_dir: str | Path) -> VideoClip:
    d = Path(clip_dir)
    fdir, gdir = d / "Frame", d / "GT"
    if not fdir.is_dir() or not gdir.is_dir():
        raise DataError(f"{d} needs both Frame/ and GT/ subdirectories")
    frame_files = sorted((p for p in fdir.iterdir() if p.suffix.lower() in FRAME_EXTS),
                         key=lambda p: natural_key(p.name))
    mask_files = sorted((p for p in gdir.iterdir() if p.suffix.lower() == ".png"),
                        key=lambda p: natural_key(p.name))
    if len(frame_files) != len(mask_files):
        raise DataError(f"{d}: {len(frame_files)} frames but {len(mask_files)} masks")
    frames, masks = [], []
    for fp in frame_files:
        mp = gdir / (fp.stem + ".png")
        if not mp.exists():
            raise DataError(f"missing mask {mp} for frame {fp}")
        frames.append(_read(fp, "RGB"))
        masks.append((_read(mp, "L") >= 128).astype(np.uint8))
    return VideoClip(d.name, frames, masks)


def load_dataset(root: str | Path) -> list[VideoClip]:
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")
    dirs = sorted((p for p in root.iterdir() if p.is_dir()), key=lambda p: natural_key(p.name))
    return [load_clip(p) for p in dirs]


# --------------------------------------------------------------------------
# pair sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    delta: int = 2
    seed: int = 0
    batch_size: int = 8
    shuffle: bool = True

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")


def sample_pairs(clip: VideoClip, cfg: SamplerConfig) -> list[FramePair]:
    """Every ``(T, T - delta)`` pair of a clip, in anchor order.

    Clips with at most ``delta`` frames produce no pairs and a
    :class:`ShortClipWarning`.
    """
    n = len(clip)
    if n <= cfg.delta:
        warnings.warn(f"clip {clip.clip_id} has {n} frames, too short for delta={cfg.delta}; skipped",
                      ShortClipWarning, stacklevel=2)
        return []
    x = clip.frame_array()
    y = clip.mask_array()
    return [FramePair(x[t], x[t - cfg.delta], y[t], y[t - cfg.delta], t, t - cfg.delta, clip.clip_id)
            for t in range(cfg.delta, n)]


def sample_dataset(clips: Sequence[VideoClip], cfg: SamplerConfig, epoch: int = 0) -> list[FramePair]:
    """Pairs from all clips; shuffled by ``(seed, epoch)`` when ``cfg.shuffle``."""
    pairs = [p for c in clips for p in sample_pairs(c, cfg)]
    if cfg.shuffle:
        order = substream(cfg.seed, "shuffle", str(epoch)).permutation(len(pairs))
        pairs = [pairs[i] for i in order]
    return pairs


@dataclass
class Batch:
    anchors: np.ndarray
    references: np.ndarray
    y_a: np.ndarray
    y_r: np.ndarray

    def __len__(self) -> int:
        return self.anchors.shape[0]


def collate(pairs: Sequence[FramePair]) -> Batch:
    return Batch(np.stack([p.anchor for p in pairs]), np.stack([p.reference for p in pairs]),
                 np.stack([p.anchor_mask for p in pairs]), np.stack([p.reference_mask for p in pairs]))


def batches(pairs: Sequence[FramePair], batch_size: int) -> Iterator[Batch]:
    for i in range(0, len(pairs), batch_size):
        yield collate(pairs[i:i + batch_size])


def augment(batch: Batch, rng: np.random.Generator, max_shift: int = 4) -> Batch:
    """Random flips and a shifted crop, applied identically to a pair's frames and masks."""
    out = []
    for arrs in zip(batch.anchors, batch.references, batch.y_a, batch.y_r):
        flip_h, flip_v = rng.random(2) < 0.5
        dy, dx = rng.integers(-max_shift, max_shift + 1, size=2)
        moved = []
        for a in arrs:
            if flip_h:
                a = a[..., ::-1]
            if flip_v:
                a = a[..., ::-1, :]
            p = np.pad(a, ((0, 0), (max_shift, max_shift), (max_shift, max_shift)), mode="edge")
            h, w = a.shape[-2:]
            moved.append(p[:, max_shift + dy:max_shift + dy + h, max_shift + dx:max_shift + dx + w])
        out.append(moved)
    cols = list(zip(*out))
    return Batch(*(np.ascontiguousarray(np.stack(c)) for c in cols))


def resize_clip(clip: VideoClip, extents: tuple[int, int]) -> VideoClip:
    """Bilinear frames, nearest-neighbour masks; returns ``clip`` itself if already sized."""
    if clip.extents == tuple(extents):
        return clip
    h, w = extents
    frames = [np.asarray(Image.fromarray(f).resize((w, h), Image.BILINEAR)) for f in clip.frames]
    masks = [np.asarray(Image.fromarray(m * 255).resize((w, h), Image.NEAREST)) // 255 for m in clip.masks]
    return VideoClip(clip.clip_id, frames, [m.astype(np.uint8) for m in masks], clip.fps)
