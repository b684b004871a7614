"""Hot inner loops with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and ``MAST_DISABLE_NUMBA``
is unset (or ``0``). Both paths produce bit-identical results; the test suite
runs them side by side and ``benchmarks/bench_kernels.py`` times them.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_BACKEND = "numpy"
if HAVE_NUMBA and os.environ.get("MAST_DISABLE_NUMBA", "0") in ("", "0"):
    _BACKEND = "numba"


def backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    _BACKEND = name


# --------------------------------------------------------------------------
# im2col / col2im
# --------------------------------------------------------------------------

def _im2col_numpy(xp, kh, kw, stride, dilation, ho, wo):
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=xp.dtype)
    for i in range(kh):
        r0 = i * dilation
        for j in range(kw):
            c0 = j * dilation
            cols[:, :, i, j] = xp[:, :, r0:r0 + stride * (ho - 1) + 1:stride,
                                  c0:c0 + stride * (wo - 1) + 1:stride]
    return cols.reshape(n, c * kh * kw, ho * wo)


def _col2im_numpy(cols, xp_shape, kh, kw, stride, dilation, ho, wo):
    n, c = xp_shape[:2]
    cols = cols.reshape(n, c, kh, kw, ho, wo)
    out = np.zeros(xp_shape, dtype=cols.dtype)
    for i in range(kh):
        r0 = i * dilation
        for j in range(kw):
            c0 = j * dilation
            out[:, :, r0:r0 + stride * (ho - 1) + 1:stride,
                c0:c0 + stride * (wo - 1) + 1:stride] += cols[:, :, i, j]
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _im2col_nb(xp, kh, kw, stride, dilation, ho, wo):
        n, c = xp.shape[0], xp.shape[1]
        cols = np.empty((n, c * kh * kw, ho * wo), dtype=xp.dtype)
        for b in range(n):
            for ch in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ch * kh + i) * kw + j
                        for y in range(ho):
                            sy = y * stride + i * dilation
                            for x in range(wo):
                                cols[b, row, y * wo + x] = xp[b, ch, sy, x * stride + j * dilation]
        return cols

    @njit(cache=True)
    def _col2im_nb(cols, out, kh, kw, stride, dilation, ho, wo):
        n, c = out.shape[0], out.shape[1]
        # same accumulation order as the numpy path: kernel offset outermost
        for i in range(kh):
            for j in range(kw):
                for b in range(n):
                    for ch in range(c):
                        row = (ch * kh + i) * kw + j
                        for y in range(ho):
                            sy = y * stride + i * dilation
                            for x in range(wo):
                                out[b, ch, sy, x * stride + j * dilation] += cols[b, row, y * wo + x]
        return out


def im2col(xp: np.ndarray, kh: int, kw: int, stride: int, dilation: int,
           ho: int, wo: int) -> np.ndarray:
    """Unfold a padded ``(N, C, H, W)`` array into ``(N, C*kh*kw, ho*wo)``."""
    if _BACKEND == "numba":
        return _im2col_nb(np.ascontiguousarray(xp), kh, kw, stride, dilation, ho, wo)
    return _im2col_numpy(xp, kh, kw, stride, dilation, ho, wo)


def col2im(cols: np.ndarray, xp_shape: tuple, kh: int, kw: int, stride: int,
           dilation: int, ho: int, wo: int) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add columns back onto the padded grid."""
    if _BACKEND == "numba":
        out = np.zeros(xp_shape, dtype=cols.dtype)
        return _col2im_nb(np.ascontiguousarray(cols), out, kh, kw, stride, dilation, ho, wo)
    return _col2im_numpy(cols, xp_shape, kh, kw, stride, dilation, ho, wo)


# --------------------------------------------------------------------------
# threshold sweep counts for metric curves
# --------------------------------------------------------------------------

THRESHOLDS = np.arange(256, dtype=np.float64) / 255.0


def _sweep_numpy(pred, gt, thresholds):
    # number of thresholds strictly below each pixel value
    rank = np.searchsorted(thresholds, pred, side="left")
    nt = thresholds.shape[0]
    hist_all = np.bincount(rank, minlength=nt + 1)
    hist_fg = np.bincount(rank[gt], minlength=nt + 1)
    # pixel with rank r exceeds thresholds 0..r-1
    above_all = np.cumsum(hist_all[::-1])[::-1][1:]
    above_fg = np.cumsum(hist_fg[::-1])[::-1][1:]
    return above_fg.astype(np.int64), above_all.astype(np.int64)


if HAVE_NUMBA:

    @njit(cache=True)
    def _sweep_nb(pred, gt, thresholds):
        nt = thresholds.shape[0]
        tp = np.zeros(nt, dtype=np.int64)
        pp = np.zeros(nt, dtype=np.int64)
        for p in range(pred.shape[0]):
            v = pred[p]
            g = gt[p]
            for k in range(nt):
                if v > thresholds[k]:
                    pp[k] += 1
                    if g:
                        tp[k] += 1
                else:
                    break
        return tp, pp


def threshold_counts(pred: np.ndarray, gt: np.ndarray,
                     thresholds: np.ndarray = THRESHOLDS) -> tuple[np.ndarray, np.ndarray]:
    """Per-threshold true-positive and predicted-positive counts.

    A pixel is foreground at threshold ``t`` when ``pred > t``. ``thresholds``
    must be ascending.
    """
    pred = np.ascontiguousarray(pred, dtype=np.float64).ravel()
    gt = np.ascontiguousarray(gt, dtype=np.bool_).ravel()
    if _BACKEND == "numba":
        return _sweep_nb(pred, gt, thresholds)
    return _sweep_numpy(pred, gt, thresholds)
