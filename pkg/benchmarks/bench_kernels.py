"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Each kernel is called once per backend before timing so numba compilation
is excluded. Outputs are checked for equality before anything is reported.
"""
import argparse
import time

import numpy as np

from mast import _kernels as K


def _time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    # a 3x3 conv input at the decoder's finest level, and a dilated TEM branch
    for name, (n, c, h, w, k, stride, dil) in {
        "im2col 3x3 16x32x32": (16, 32, 32, 32, 3, 1, 1),
        "im2col 3x3 s2 3x64x64": (16, 3, 64, 64, 3, 2, 1),
        "im2col 3x3 d5 32x8x8": (16, 32, 8, 8, 3, 1, 5),
    }.items():
        pad = dil * (k // 2) if stride == 1 else 1
        xp = rng.normal(size=(n, c, h + 2 * pad, w + 2 * pad))
        ho = (h + 2 * pad - dil * (k - 1) - 1) // stride + 1
        wo = (w + 2 * pad - dil * (k - 1) - 1) // stride + 1
        cols = rng.normal(size=(n, c * k * k, ho * wo))
        yield name, lambda xp=xp, k=k, s=stride, d=dil, ho=ho, wo=wo: K.im2col(xp, k, k, s, d, ho, wo)
        yield name.replace("im2col", "col2im"), \
            lambda cols=cols, shp=xp.shape, k=k, s=stride, d=dil, ho=ho, wo=wo: K.col2im(cols, shp, k, k, s, d, ho, wo)

    pred = np.floor(rng.random(64 * 64 * 30) * 256) / 255.0
    gt = rng.random(pred.size) > 0.8
    yield "threshold sweep 30x64x64", lambda: K.threshold_counts(pred, gt)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':28s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng):
        K.set_backend("numpy")
        ref = fn()
        t_np = _time(fn, args.repeat)
        K.set_backend("numba")
        got = fn()
        t_nb = _time(fn, args.repeat)
        for a, b in zip(ref if isinstance(ref, tuple) else (ref,), got if isinstance(got, tuple) else (got,)):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
        print(f"{name:28s} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:7.2f}x")


if __name__ == "__main__":
    main()
