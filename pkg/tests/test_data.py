import numpy as np
import pytest
from PIL import Image

from mast import data as D


def test_generation_is_deterministic():
    a = D.generate_synthetic_clip(5, 8)
    b = D.generate_synthetic_clip(5, 8)
    for fa, fb, ma, mb in zip(a.frames, b.frames, a.masks, b.masks):
        assert fa.tobytes() == fb.tobytes()
        assert ma.tobytes() == mb.tobytes()
    c = D.generate_synthetic_clip(6, 8)
    assert any(fa.tobytes() != fc.tobytes() for fa, fc in zip(a.frames, c.frames))


@pytest.mark.parametrize("difficulty", D.DIFFICULTIES)
def test_mask_area_bounds(difficulty):
    for seed in range(12):
        clip = D.generate_synthetic_clip(seed, 10, (64, 64), difficulty)
        for m in clip.masks:
            assert 0 < m.sum() < 0.25 * m.size
            assert set(np.unique(m)) <= {0, 1}


def test_trajectory_replay():
    speed = 1.5
    for seed in range(6):
        clip = D.generate_synthetic_clip(seed, 20, (48, 64), max_speed=speed)
        h, w = clip.extents
        for t, m in enumerate(clip.masks):
            np.testing.assert_array_equal(m.astype(bool), D.render_mask(clip.tracks, t, h, w))
        for tr in clip.tracks:
            step = np.hypot(np.diff(tr.cy), np.diff(tr.cx))
            assert step.max() <= speed + 1e-12


def test_generation_errors():
    with pytest.raises(ValueError, match="too small"):
        D.generate_synthetic_clip(0, 4, (8, 8))
    with pytest.raises(ValueError, match="difficulty"):
        D.generate_synthetic_clip(0, 4, difficulty="medium")


def test_hard_has_lower_contrast():
    def contrast(clip):
        f = np.stack(clip.frames).astype(float)
        m = np.stack(clip.masks).astype(bool)
        return abs(f[m].mean() - f[~m].mean())
    assert contrast(D.generate_synthetic_clip(3, 5, difficulty="hard")) < \
        contrast(D.generate_synthetic_clip(3, 5, difficulty="easy"))


# ---------------------------------------------------------------- disk layout

def test_export_load_roundtrip(tmp_path):
    clips = D.synthetic_dataset(1, 2, 6, (32, 32))
    for c in clips:
        D.export_clip(c, tmp_path)
    back = D.load_dataset(tmp_path)
    assert [c.clip_id for c in back] == [c.clip_id for c in clips]
    for a, b in zip(clips, back):
        assert len(a) == len(b)
        for fa, fb, ma, mb in zip(a.frames, b.frames, a.masks, b.masks):
            assert fa.tobytes() == fb.tobytes()
            assert ma.tobytes() == mb.tobytes()


def test_empty_root(tmp_path):
    assert D.load_dataset(tmp_path) == []


def test_natural_order(tmp_path):
    d = tmp_path / "clipA"
    (d / "Frame").mkdir(parents=True)
    (d / "GT").mkdir()
    for i in (10, 2, 1):
        Image.fromarray(np.full((4, 4, 3), i, np.uint8)).save(d / "Frame" / f"img{i}.png")
        Image.fromarray(np.full((4, 4), 127 + i, np.uint8)).save(d / "GT" / f"img{i}.png")
    clip = D.load_clip(d)
    assert [int(f[0, 0, 0]) for f in clip.frames] == [1, 2, 10]
    # 128 and above is foreground
    assert [int(m[0, 0]) for m in clip.masks] == [1, 1, 1]
    Image.fromarray(np.full((4, 4), 127, np.uint8)).save(d / "GT" / "img2.png")
    assert int(D.load_clip(d).masks[1][0, 0]) == 0


def test_missing_and_mismatched(tmp_path):
    clip = D.generate_synthetic_clip(0, 3, (16, 16), clip_id="c")
    d = D.export_clip(clip, tmp_path)
    (d / "GT" / "c_2.png").unlink()
    with pytest.raises(D.DataError, match="3 frames but 2 masks"):
        D.load_dataset(tmp_path)
    Image.fromarray(np.zeros((16, 16), np.uint8)).save(d / "GT" / "other.png")
    with pytest.raises(D.DataError, match="missing mask .*c_2.png"):
        D.load_dataset(tmp_path)


def test_unreadable_image(tmp_path):
    clip = D.generate_synthetic_clip(0, 2, (16, 16), clip_id="c")
    d = D.export_clip(clip, tmp_path)
    (d / "Frame" / "c_1.png").write_bytes(b"not a png")
    with pytest.raises(D.DataError, match="c_1.png"):
        D.load_dataset(tmp_path)


def test_resize_clip():
    clip = D.generate_synthetic_clip(0, 3, (32, 32))
    small = D.resize_clip(clip, (16, 16))
    assert small.extents == (16, 16)
    assert set(np.unique(np.stack(small.masks))) <= {0, 1}
    assert D.resize_clip(clip, (32, 32)) is clip


# ---------------------------------------------------------------- sampling

def _clip(n):
    return D.generate_synthetic_clip(0, n, (16, 16)) if n >= 2 else D.VideoClip(
        "one", [np.zeros((16, 16, 3), np.uint8)], [np.zeros((16, 16), np.uint8)])


def test_sampler_enumeration():
    pairs = D.sample_pairs(_clip(5), D.SamplerConfig(delta=2))
    assert [(p.t_anchor, p.t_reference) for p in pairs] == [(2, 0), (3, 1), (4, 2)]
    assert len(D.sample_pairs(_clip(2), D.SamplerConfig(delta=1))) == 1


def test_sampler_contract():
    clip = _clip(12)
    for delta in (1, 2, 3, 5):
        pairs = D.sample_pairs(clip, D.SamplerConfig(delta=delta))
        assert len(pairs) == len(clip) - delta
        for p in pairs:
            assert p.t_anchor - p.t_reference == delta == p.delta
            np.testing.assert_array_equal(p.anchor, clip.frame_array()[p.t_anchor])
            np.testing.assert_array_equal(p.reference_mask[0], clip.masks[p.t_reference])


def test_short_clip_warns():
    with pytest.warns(D.ShortClipWarning, match="too short"):
        assert D.sample_pairs(_clip(3), D.SamplerConfig(delta=3)) == []
    with pytest.warns(D.ShortClipWarning):
        assert D.sample_pairs(_clip(1), D.SamplerConfig(delta=1)) == []


def test_sampler_config_validation():
    with pytest.raises(ValueError, match="delta"):
        D.SamplerConfig(delta=0)


def test_shuffle_is_seeded():
    clips = [_clip(6), _clip(7)]
    cfg = D.SamplerConfig(delta=2, seed=4)
    a = [(p.clip_id, p.t_anchor) for p in D.sample_dataset(clips, cfg, epoch=1)]
    b = [(p.clip_id, p.t_anchor) for p in D.sample_dataset(clips, cfg, epoch=1)]
    c = [(p.clip_id, p.t_anchor) for p in D.sample_dataset(clips, cfg, epoch=2)]
    assert a == b and sorted(a) == sorted(c) and a != c
    ordered = D.sample_dataset(clips, D.SamplerConfig(delta=2, shuffle=False))
    assert [p.t_anchor for p in ordered] == [2, 3, 4, 5, 2, 3, 4, 5, 6]


def test_batches_and_augment():
    pairs = D.sample_pairs(_clip(8), D.SamplerConfig(delta=1))
    bs = list(D.batches(pairs, 3))
    assert [len(b) for b in bs] == [3, 3, 1]
    assert bs[0].anchors.shape == (3, 3, 16, 16) and bs[0].y_a.shape == (3, 1, 16, 16)
    aug = D.augment(bs[0], np.random.default_rng(0))
    assert aug.anchors.shape == bs[0].anchors.shape
    # flips and a small shift keep masks binary and change area only at the cropped margin
    assert set(np.unique(aug.y_a)) <= {0.0, 1.0}
    assert abs(aug.y_a.sum() - bs[0].y_a.sum()) <= 0.5 * bs[0].y_a.sum()
