import numpy as np
import pytest

from mast import attention as A
from mast import tensor as T
from mast.tensor import Tensor

from oracles import central_diff, mixture_attention_literal, rel_error


def _emb(rng, b=1, p2=16, nc=8):
    return Tensor(rng.normal(size=(b, p2, nc)))


def test_embed_shape_and_zero():
    f = Tensor(np.zeros((1, 32, 8, 8)))
    e = A.embed(f, Tensor(np.zeros((32, 32))), Tensor(np.zeros(32)), Tensor(np.zeros((16, 128))), 4)
    assert e.shape == (1, 16, 128)
    assert not e.data.any()


def test_embed_layout_roundtrip():
    rng = np.random.default_rng(0)
    f = Tensor(rng.normal(size=(2, 5, 8, 12)))
    e = A.embed(f, Tensor(np.eye(5)), None, Tensor(np.zeros((4, 6 * 4 * 5))), 2)
    back = A.unpatchify(e, 5, 8, 12, 2)
    np.testing.assert_array_equal(back.data, f.data)
    # row = position inside the patch, column block = patch in raster order
    # pixel (y=3, x=6) sits at offset (1, 0) of patch (1, 3), i.e. patch 1 * 6 + 3
    assert e.data[1, 1 * 2 + 0, (1 * 6 + 3) * 5 + 4] == f.data[1, 4, 3, 6]


def test_embed_errors():
    f = Tensor(np.zeros((1, 4, 6, 6)))
    with pytest.raises(ValueError, match="does not divide"):
        A.embed(f, Tensor(np.eye(4)), None, Tensor(np.zeros((16, 16))), 4)
    with pytest.raises(ValueError, match="position embedding"):
        A.embed(f, Tensor(np.eye(4)), None, Tensor(np.zeros((9, 15))), 3)


def test_attention_blocks():
    rng = np.random.default_rng(1)
    ea, er = _emb(rng), _emb(rng)
    bun = A.attention_matrix(ea, er)
    a, r = ea.data[0], er.data[0]
    np.testing.assert_allclose(bun.ra.data[0], r.T @ a, atol=1e-12)
    np.testing.assert_allclose(bun.rr.data[0], r.T @ r, atol=1e-12)
    np.testing.assert_allclose(bun.aa.data[0], a.T @ a, atol=1e-12)
    np.testing.assert_allclose(bun.ar.data[0], a.T @ r, atol=1e-12)
    full = np.concatenate([r, a], 1).T @ np.concatenate([a, r], 1)
    np.testing.assert_allclose(bun.full.data[0], full, atol=1e-12)


def test_attention_degenerate_cases():
    rng = np.random.default_rng(2)
    e = _emb(rng)
    bun = A.attention_matrix(e, e)
    for blk in (bun.ra, bun.rr, bun.ar):
        np.testing.assert_array_equal(blk.data, bun.aa.data)
    q, _ = np.linalg.qr(rng.normal(size=(16, 16)))
    ea, er = Tensor(q[None, :, :8]), Tensor(q[None, :, 8:])
    bun = A.attention_matrix(ea, er)
    assert np.abs(bun.ra.data).max() < 1e-12 and np.abs(bun.ar.data).max() < 1e-12
    with pytest.raises(ValueError, match="embedding shapes differ"):
        A.attention_matrix(_emb(rng), _emb(rng, nc=4))


def test_attention_identities_many_seeds():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        bun = A.attention_matrix(_emb(rng, 2), _emb(rng, 2))
        assert np.array_equal(bun.ra.data, np.swapaxes(bun.ar.data, -1, -2))
        for blk in (bun.rr.data, bun.aa.data):
            assert np.abs(blk - np.swapaxes(blk, -1, -2)).max() <= 1e-12
            assert np.linalg.eigvalsh(blk).min() >= -1e-8


def test_enhance_uniform_and_convex():
    rng = np.random.default_rng(3)
    ea, er = _emb(rng), _emb(rng)
    const = Tensor(np.full((1, 8, 8), 2.5))
    bun = A.AttentionBundle(const, const, const, const)
    enh = A.enhance(ea, er, bun)
    np.testing.assert_allclose(enh.a_self.data, np.repeat(ea.data.mean(-1, keepdims=True), 8, -1), atol=1e-12)

    enh = A.enhance(ea, er, A.attention_matrix(ea, er))
    s = T.softmax(A.attention_matrix(ea, er).ra, -2).data
    np.testing.assert_allclose(s.sum(axis=-2), 1.0, atol=1e-12)
    for out, src in ((enh.r_mutual, er), (enh.a_self, ea), (enh.a_mutual, ea)):
        assert np.abs(out.data).max() <= np.abs(src.data).max() + 1e-12


def test_enhance_against_dense_oracle():
    rng = np.random.default_rng(4)
    ea, er = _emb(rng), _emb(rng)
    bun = A.attention_matrix(ea, er)
    enh = A.enhance(ea, er, bun)

    def sm(x):
        e = np.exp(x - x.max(axis=0))
        return e / e.sum(axis=0)

    a, r = ea.data[0], er.data[0]
    np.testing.assert_allclose(enh.r_mutual.data[0], r @ sm(r.T @ a), atol=1e-12)
    np.testing.assert_allclose(enh.a_mutual.data[0], a @ sm(r.T @ a), atol=1e-12)
    np.testing.assert_allclose(enh.a_self.data[0], a @ sm(a.T @ a), atol=1e-12)
    np.testing.assert_allclose(enh.r_self.data[0], r @ sm(r.T @ r), atol=1e-12)
    with pytest.raises(ValueError, match="mutual mode"):
        A.enhance(ea, er, bun, mutual="both")


def test_fuse_endpoints_and_linearity():
    rng = np.random.default_rng(5)
    ea, er = _emb(rng), _emb(rng)
    enh = A.enhance(ea, er, A.attention_matrix(ea, er))
    z_a, z_r = A.fuse(enh, 0.0)
    np.testing.assert_array_equal(z_a.data, enh.a_self.data)
    np.testing.assert_array_equal(z_r.data, enh.r_self.data)
    z_a, z_r = A.fuse(enh, 1.0)
    np.testing.assert_array_equal(z_a.data, enh.r_mutual.data)
    np.testing.assert_array_equal(z_r.data, enh.a_mutual.data)
    z_a, _ = A.fuse(enh, 0.7)
    np.testing.assert_allclose(z_a.data, 0.7 * enh.r_mutual.data + 0.3 * enh.a_self.data, atol=1e-15)
    # affine in lambda: the slope is (mutual - self)
    lo, hi = A.fuse(enh, 0.3)[0].data, A.fuse(enh, 0.4)[0].data
    np.testing.assert_allclose((hi - lo) / 0.1, enh.r_mutual.data - enh.a_self.data, atol=1e-12)
    for bad in (-0.1, 1.5):
        with pytest.raises(ValueError, match="lambda"):
            A.fuse(enh, bad)


def _ma_inputs(seed, c=32, h=8, w=8, p=4):
    rng = np.random.default_rng(seed)
    n = (h // p) * (w // p)
    return (rng.normal(size=(1, c, h, w)) * 0.3, rng.normal(size=(1, c, h, w)) * 0.3,
            np.eye(c) + 0.05 * rng.normal(size=(c, c)), 0.1 * rng.normal(size=c),
            0.1 * rng.normal(size=(p * p, n * c)))


def test_mixture_attention_matches_literal_oracle():
    fa, fr, w, b, pos = _ma_inputs(6)
    za, zr = A.mixture_attention(Tensor(fa), Tensor(fr), Tensor(w), Tensor(b), Tensor(pos), 0.7, 4)
    oa, orr = mixture_attention_literal(fa[0], fr[0], w, b, pos, 0.7, 4)
    assert za.shape == fa.shape and zr.shape == fr.shape
    assert np.abs(za.data[0] - oa).max() <= 1e-10
    assert np.abs(zr.data[0] - orr).max() <= 1e-10


def test_swap_behaviour_by_mode():
    fa, fr, w, b, pos = _ma_inputs(7)
    args = (Tensor(w), Tensor(b), Tensor(pos), 0.7, 4)
    ta, tr = A.mixture_attention(Tensor(fa), Tensor(fr), *args, mutual="transposed")
    sa, sr = A.mixture_attention(Tensor(fr), Tensor(fa), *args, mutual="transposed")
    np.testing.assert_allclose(sa.data, tr.data, atol=1e-12)
    np.testing.assert_allclose(sr.data, ta.data, atol=1e-12)
    # the two readings agree on the anchor output and differ on the reference one
    oa, o_r = A.mixture_attention(Tensor(fa), Tensor(fr), *args, mutual="literal")
    np.testing.assert_array_equal(oa.data, ta.data)
    assert np.abs(o_r.data - tr.data).max() > 1e-6
    # after a swap the literal anchor output is the transposed reference output,
    # but the literal reading is not itself swap-symmetric
    la, lr = A.mixture_attention(Tensor(fr), Tensor(fa), *args, mutual="literal")
    np.testing.assert_allclose(la.data, tr.data, atol=1e-12)
    assert np.abs(la.data - o_r.data).max() > 1e-6
    assert np.abs(lr.data - oa.data).max() > 1e-6


def test_identical_inputs_give_identical_outputs():
    fa, _, w, b, pos = _ma_inputs(8)
    for lam in (0.0, 0.3, 1.0):
        za, zr = A.mixture_attention(Tensor(fa), Tensor(fa.copy()), Tensor(w), Tensor(b), Tensor(pos), lam, 4)
        np.testing.assert_array_equal(za.data, zr.data)


def test_mixture_attention_gradients():
    fa, fr, w, b, pos = _ma_inputs(9, c=4, h=4, w=4, p=2)
    arrays = [fa, fr, w, b, pos]
    probe = np.random.default_rng(10).normal(size=fa.shape)

    def loss_value():
        za, zr = A.mixture_attention(*(Tensor(x) for x in arrays[:2]), Tensor(arrays[2]), Tensor(arrays[3]),
                                     Tensor(arrays[4]), 0.7, 2)
        return float((za.data * probe).sum() + (zr.data ** 2).sum())

    ts = [Tensor(x, requires_grad=True) for x in arrays]
    za, zr = A.mixture_attention(*ts, 0.7, 2)
    T.backward(T.sum(za * Tensor(probe)) + T.sum(zr * zr))
    rng = np.random.default_rng(11)
    idx = [(k, int(rng.integers(arrays[k].size))) for k in range(5) for _ in range(6)]
    fd = central_diff(loss_value, arrays, idx)
    an = np.array([ts[k].grad.reshape(-1)[i] for k, i in idx])
    assert rel_error(an, fd).max() < 1e-4


def test_module_shapes_and_init():
    from mast.rng import substream
    m = A.MixtureAttention(substream(0, "t"), 8, 8, 8, 4)
    assert m.position.shape == (16, 4 * 8)
    np.testing.assert_array_equal(m.proj_weight.data, np.eye(8))
    za, zr = m(Tensor(np.ones((2, 8, 8, 8))), Tensor(np.zeros((2, 8, 8, 8))))
    assert za.shape == zr.shape == (2, 8, 8, 8)
    with pytest.raises(ValueError, match="does not divide"):
        A.MixtureAttention(substream(0, "t"), 8, 6, 6, 4)
