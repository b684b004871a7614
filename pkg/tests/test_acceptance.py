"""The eight acceptance criteria, one test each, at their stated tolerances.

Every test prints a single ``criterion N: PASS|FAIL ...`` line to the
terminal (even under capture) before asserting. Criteria 5, 6 and 8 train
models and are marked ``slow``; ``pytest -m "not slow"`` skips them.
"""
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from mast import attention as A
from mast import metrics as M
from mast import tensor as T
from mast.ablate import ablate
from mast.config import RunConfig
from mast.data import SamplerConfig, export_clip, generate_synthetic_clip, load_dataset, sample_pairs
from mast.decoder import total_loss
from mast.model import MAST, ModelConfig
from mast.tensor import Tensor
from mast.train import NumericalAbort, train

from oracles import (central_diff, counts, e_measure_literal, mixture_attention_literal, rel_error,
                     s_measure_literal)


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return emit


def test_criterion_1_attention_identities(report):
    t0 = time.perf_counter()
    worst_sym, worst_eig, exact = 0.0, np.inf, True
    for seed in range(50):
        rng = np.random.default_rng(seed)
        ea, er = (Tensor(rng.normal(size=(1, 16, 8))) for _ in range(2))
        bun = A.attention_matrix(ea, er)
        exact &= bool(np.array_equal(bun.ra.data[0], bun.ar.data[0].T))
        for blk in (bun.rr.data[0], bun.aa.data[0]):
            worst_sym = max(worst_sym, float(np.abs(blk - blk.T).max()))
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh(blk).min()))
    dt = time.perf_counter() - t0
    ok = exact and worst_sym <= 1e-12 and worst_eig >= -1e-8 and dt < 10
    report(1, ok, f"ra==ar^T exact={exact} max asym={worst_sym:.1e} min eig={worst_eig:.2e} ({dt:.2f}s)")
    assert ok


def test_criterion_2_oracle_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    c, h, w, p = 32, 8, 8, 4
    fa, fr = rng.normal(size=(1, c, h, w)), rng.normal(size=(1, c, h, w))
    wt = np.eye(c) + 0.05 * rng.normal(size=(c, c))
    b = 0.1 * rng.normal(size=c)
    pos = 0.1 * rng.normal(size=(p * p, (h // p) * (w // p) * c))
    za, zr = A.mixture_attention(Tensor(fa), Tensor(fr), Tensor(wt), Tensor(b), Tensor(pos), 0.7, p)
    oa, orr = mixture_attention_literal(fa[0], fr[0], wt, b, pos, 0.7, p)
    err = max(float(np.abs(za.data[0] - oa).max()), float(np.abs(zr.data[0] - orr).max()))
    dt = time.perf_counter() - t0
    ok = err <= 1e-10 and dt < 10
    report(2, ok, f"max elementwise deviation {err:.2e} ({dt:.2f}s)")
    assert ok


def test_criterion_3_composite_gradient(report):
    t0 = time.perf_counter()
    model = MAST(ModelConfig(resolution=16, patch=2), seed=3)
    rng = np.random.default_rng(0)
    xa, xr = rng.random((1, 3, 16, 16)), rng.random((1, 3, 16, 16))
    ya = np.zeros((1, 1, 16, 16))
    ya[..., 4:10, 5:12] = 1
    yr = np.zeros((1, 1, 16, 16))
    yr[..., 5:11, 4:11] = 1
    params = model.parameters()

    pa, pr = model(xa, xr)
    model.zero_grad()
    T.backward(total_loss(pa, pr, ya, yr))
    grads = [p.grad.copy() for p in params]

    def loss_value():
        with T.no_grad():
            return float(total_loss(*model(xa, xr), ya, yr).data)

    arrays = [p.data for p in params]
    idx = []
    for _ in range(200):
        j = int(rng.integers(len(params)))
        idx.append((j, int(rng.integers(arrays[j].size))))
    fd = central_diff(loss_value, arrays, idx, h=1e-3)
    an = np.array([grads[j].reshape(-1)[i] for j, i in idx])
    err = float(rel_error(an, fd).max())
    dt = time.perf_counter() - t0
    ok = err < 1e-4 and dt < 120
    report(3, ok, f"max relative error {err:.2e} over 200 parameters ({dt:.1f}s)")
    assert ok


def test_criterion_4_metric_oracles(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_count = worst_struct = worst_f1 = 0.0
    for _ in range(100):
        gt = (rng.random((8, 8)) < rng.uniform(0.1, 0.6)).astype(np.uint8)
        pred = (rng.random((8, 8)) < rng.uniform(0.1, 0.7)).astype(np.float64)
        tp, fp, fn = counts(pred, gt)
        dev = [abs(M.dice(pred, gt) - (1.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)))]
        if tp + fn:
            dev += [abs(M.sensitivity(pred, gt) - tp / (tp + fn)), abs(M.recall(pred, gt) - tp / (tp + fn))]
        if tp + fp:
            dev.append(abs(M.precision(pred, gt) - tp / (tp + fp)))
        worst_count = max(worst_count, *dev)
        worst_struct = max(worst_struct, abs(M.s_measure(pred, gt) - s_measure_literal(pred, gt)),
                           abs(M.e_measure_mean(pred, gt) - e_measure_literal(pred, gt)))
        binary = M.binarize(pred, M.adaptive_threshold(pred))
        worst_f1 = max(worst_f1, abs(M.f_measure_mean(pred, gt, beta_sq=1.0) - M.dice(binary, gt)))
    dt = time.perf_counter() - t0
    ok = worst_count <= 1e-12 and worst_struct <= 1e-9 and worst_f1 <= 1e-12 and dt < 30
    report(4, ok, f"counts {worst_count:.1e}, S/E {worst_struct:.1e}, F1-Dice {worst_f1:.1e} ({dt:.1f}s)")
    assert ok


@pytest.mark.slow
def test_criterion_5_desk_scale_training(report, tmp_path):
    # default config: 40 clips x 30 frames at 64x64; stop as soon as the target is met
    cfg = replace(RunConfig(), epochs=20, stop_dice=0.85, out=str(tmp_path / "default"))
    t0 = time.perf_counter()
    res = train(cfg)
    dt = time.perf_counter() - t0
    endpoints = {}
    for lam in (0.0, 1.0):
        try:
            r = train(replace(cfg, lam=lam, epochs=2, out=str(tmp_path / f"lam{lam:g}")))
            endpoints[lam] = f"dice {r.best_dice:.3f}"
        except NumericalAbort as exc:
            endpoints[lam] = f"abort: {exc}"
    no_abort = all(not v.startswith("abort") for v in endpoints.values())
    ok = res.best_dice >= 0.85 and dt < 30 * 60 and no_abort
    report(5, ok, f"held-out dice {res.best_dice:.4f} at epoch {res.best_epoch} in {dt / 60:.1f} min "
                  f"(1 core); lambda endpoints {endpoints}")
    assert ok


# reduced setting so that twenty trainings stay affordable on one core
ABLATION = dict(resolution=32, patch=2, n_clips=16, n_eval_clips=8, n_frames=12, epochs=6, batch_size=4)


@pytest.mark.slow
def test_criterion_6_ablation_trend(report, tmp_path):
    seeds = [0, 1, 2, 3, 4]
    cfg = replace(RunConfig(), **ABLATION, out=str(tmp_path))
    rows = ablate(cfg, "components", seeds, tmp_path)
    dice = {(r["setting"], r["seed"]): r["dice"] for r in rows}
    good = 0
    for s in seeds:
        full, sia, att, base = (dice[(k, s)] for k in ("full", "+siamese", "+mixture_attention", "baseline"))
        good += full >= sia and full >= att and sia >= base and att >= base
    means = {k: np.mean([dice[(k, s)] for s in seeds]) for k in ("baseline", "+siamese", "+mixture_attention", "full")}
    ok = good >= 4
    report(6, ok, f"monotone ordering in {good}/5 seeds; mean dice "
                  + ", ".join(f"{k} {v:.3f}" for k, v in means.items()))
    assert ok


def test_criterion_7_pipeline_contracts(report, tmp_path):
    t0 = time.perf_counter()
    ok = True
    clips = [generate_synthetic_clip(s, n, (32, 32), clip_id=f"clip{s}") for s, n in ((0, 12), (1, 7), (2, 9))]
    for clip in clips:
        for delta in (1, 2, 3, 5):
            pairs = sample_pairs(clip, SamplerConfig(delta=delta))
            ok &= len(pairs) == len(clip) - delta
            ok &= all(p.t_anchor - p.t_reference == delta for p in pairs)
        export_clip(clip, tmp_path)
    back = load_dataset(tmp_path)
    for a, b in zip(clips, back):
        ok &= a.clip_id == b.clip_id and len(a) == len(b)
        ok &= all(x.tobytes() == y.tobytes() for x, y in zip(a.frames + a.masks, b.frames + b.masks))
    dt = time.perf_counter() - t0
    ok = bool(ok) and len(back) == len(clips) and dt < 10
    report(7, ok, f"pair counts, gaps and export/import round-trip ({dt:.2f}s)")
    assert ok


def _artifacts(out: Path) -> dict[str, bytes]:
    keep = [out / "runlog.jsonl"] + sorted((out / "best").iterdir()) + sorted((out / "last").iterdir())
    return {str(p.relative_to(out)): p.read_bytes() for p in keep}


@pytest.mark.slow
def test_criterion_8_determinism(report, tmp_path):
    cfg = replace(RunConfig(), resolution=32, patch=2, n_clips=8, n_eval_clips=2, n_frames=12, epochs=3)
    a = train(replace(cfg, out=str(tmp_path / "a")))
    b = train(replace(cfg, out=str(tmp_path / "b")))
    fa, fb = _artifacts(a.out), _artifacts(b.out)
    differing = sorted(k for k in fa if fa[k] != fb.get(k))
    ok = set(fa) == set(fb) and not differing
    report(8, ok, f"{len(fa)} run-log and checkpoint files compared, differing: {differing or 'none'}")
    assert ok
