"""Dense float64 tensor with reverse-mode differentiation.

Every differentiable op records its inputs and a backward rule on the output
tensor. :class:`Tape` orders the recorded ops topologically from a scalar
loss and replays the backward rules once each, in reverse.
"""
from __future__ import annotations

import contextlib
import os
import struct
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels

_state = threading.local()
_DEBUG = os.environ.get("MAST_DEBUG_FINITE", "0") not in ("", "0")


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf shows up in a tensor buffer."""


def set_debug(flag: bool) -> None:
    """Enable the eager NaN/Inf scan after every op."""
    global _DEBUG
    _DEBUG = bool(flag)


def grad_enabled() -> bool:
    return getattr(_state, "grad", True)


@contextlib.contextmanager
def no_grad():
    prev = grad_enabled()
    _state.grad = False
    try:
        yield
    finally:
        _state.grad = prev


class FlopCounter:
    """Accumulates multiply-accumulates of matmul, linear and conv2d (2 flops each)."""

    def __init__(self):
        self.macs = 0

    @property
    def flops(self) -> int:
        return 2 * self.macs


@contextlib.contextmanager
def count_flops():
    counter = FlopCounter()
    prev = getattr(_state, "flops", None)
    _state.flops = counter
    try:
        yield counter
    finally:
        _state.flops = prev


def _add_macs(n: int) -> None:
    counter = getattr(_state, "flops", None)
    if counter is not None:
        counter.macs += int(n)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64, copy=None, order="C")
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self._op = "leaf"

    # -- basic accessors --------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{flag})"

    # -- operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def backward(self) -> None:
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_rule, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op = op
    if _DEBUG and not np.isfinite(data).all():
        raise NonFiniteError(f"non-finite values produced by {op}")
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_rule
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


# --------------------------------------------------------------------------
# tape
# --------------------------------------------------------------------------

@dataclass
class Node:
    output: Tensor
    inputs: tuple[Tensor, ...]
    rule: Callable


class Tape:
    """Topologically ordered record of the ops that produced a tensor."""

    def __init__(self, nodes: list[Node]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order: list[Node] = []
        seen: set[int] = set()
        # iterative post-order DFS; graphs can be thousands of ops deep
        stack: list[tuple[Tensor, bool]] = [(out, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                order.append(Node(t, t._parents, t._backward))
                continue
            if id(t) in seen or t._backward is None:
                continue
            seen.add(id(t))
            stack.append((t, True))
            for p in reversed(t._parents):
                if p._backward is not None and id(p) not in seen:
                    stack.append((p, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)

    def run_backward(self, seed: np.ndarray) -> None:
        root = self.nodes[-1].output if self.nodes else None
        pending: dict[int, np.ndarray] = {}
        if root is not None:
            pending[id(root)] = seed
        for node in reversed(self.nodes):
            g = pending.pop(id(node.output), None)
            if g is None:
                continue
            # intermediates get a read-only view of their gradient
            node.output.grad = g
            grads = node.rule(g)
            for inp, gi in zip(node.inputs, grads):
                if gi is None or not inp.requires_grad:
                    continue
                if inp._backward is None:
                    _accumulate(inp, gi)
                elif id(inp) in pending:
                    pending[id(inp)] = pending[id(inp)] + gi
                else:
                    pending[id(inp)] = gi


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if g.shape != t.data.shape:
        raise ValueError(f"gradient shape {g.shape} does not match tensor {t.shape}")
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def backward(loss: Tensor) -> None:
    """Fill ``.grad`` of every requires-grad tensor reachable from ``loss``."""
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss is not connected to any tensor that requires grad")
    seed = np.ones_like(loss.data)
    if loss._backward is None:
        _accumulate(loss, seed)
        return
    Tape.from_output(loss).run_backward(seed)


# --------------------------------------------------------------------------
# elementwise arithmetic
# --------------------------------------------------------------------------

def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    out = ad / bd

    def rule(g):
        return _unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)

    return _make(out, (a, b), rule, "div")


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of two tensors of identical shape."""
    if a.shape != b.shape:
        raise ValueError(f"hadamard needs identical shapes, got {a.shape} and {b.shape}")
    return mul(a, b)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,), "log")


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def gelu(a: Tensor) -> Tensor:
    """tanh-approximated GELU."""
    x = a.data
    c = np.sqrt(2.0 / np.pi)
    inner = c * (x + 0.044715 * x ** 3)
    th = np.tanh(inner)
    out = 0.5 * x * (1.0 + th)

    def rule(g):
        dinner = c * (1.0 + 3 * 0.044715 * x ** 2)
        return (g * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th ** 2) * dinner),)

    return _make(out, (a,), rule, "gelu")


def bce_with_logits(logits: Tensor, target) -> Tensor:
    """Elementwise binary cross-entropy of ``sigmoid(logits)`` against ``target``.

    ``target`` is treated as a constant.
    """
    x = logits.data
    y = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    out = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    return _make(out, (logits,), lambda g: (g * (_sigmoid(x) - y),), "bce")


# --------------------------------------------------------------------------
# reductions and layout
# --------------------------------------------------------------------------

def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = a.shape
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(np.asarray(out, dtype=np.float64), (a,), rule, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([a.shape[ax] for ax in axes]))
    return mul(sum(a, axis, keepdims), 1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    out = np.ascontiguousarray(np.transpose(a.data, axes))
    return _make(out, (a,), lambda g: (np.transpose(g, inv),), "transpose")


def index(a: Tensor, idx) -> Tensor:
    shape = a.shape
    out = np.array(a.data[idx], dtype=np.float64)

    def rule(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _make(out, (a,), rule, "index")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    axis = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(t.shape[i] != ref[i] for i in range(len(ref)) if i != axis):
            raise ValueError(f"concat along axis {axis}: incompatible shapes {ref} and {t.shape}")
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def rule(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, rule, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    return concat([reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors], axis)


def split(a: Tensor, axis: int, at: int) -> tuple[Tensor, Tensor]:
    """Cut ``a`` into ``[:at]`` and ``[at:]`` along ``axis``."""
    axis = axis % a.ndim
    n = a.shape[axis]
    if not 0 < at < n:
        raise ValueError(f"split point {at} outside (0, {n}) for axis {axis}")
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[axis] = slice(0, at)
    hi[axis] = slice(at, n)
    return _slice(a, tuple(lo)), _slice(a, tuple(hi))


def _slice(a: Tensor, sl: tuple) -> Tensor:
    # basic slices only: plain assignment is a valid adjoint
    shape = a.shape
    out = np.ascontiguousarray(a.data[sl])

    def rule(g):
        full = np.zeros(shape)
        full[sl] = g
        return (full,)

    return _make(out, (a,), rule, "slice")


# --------------------------------------------------------------------------
# linear algebra
# --------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes must match exactly."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    ad, bd = a.data, b.data
    _add_macs(np.prod(a.shape[:-1]) * a.shape[-1] * b.shape[-1])

    def rule(g):
        return g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g

    return _make(ad @ bd, (a, b), rule, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` over the last axis of ``x`` (any leading shape)."""
    lead = x.shape[:-1]
    xd = x.data.reshape(-1, x.shape[-1])
    wd = weight.data
    out = xd @ wd
    _add_macs(xd.shape[0] * wd.shape[0] * wd.shape[1])
    if bias is not None:
        out = out + bias.data

    def rule(g):
        g2 = g.reshape(-1, wd.shape[1])
        gx = (g2 @ wd.T).reshape(x.shape)
        gw = xd.T @ g2
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out.reshape(lead + (wd.shape[1],)), parents, rule, "linear")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if not -a.ndim <= axis < a.ndim:
        raise ValueError(f"softmax axis {axis} out of range for rank {a.ndim}")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def rule(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), rule, "softmax")


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data
    n = xd.shape[-1]

    def rule(g):
        lead = tuple(range(g.ndim - 1))
        gg = (g * xhat).sum(axis=lead)
        gb = g.sum(axis=lead)
        gx_hat = g * gamma.data
        gx = inv / n * (n * gx_hat - gx_hat.sum(axis=-1, keepdims=True)
                        - xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True))
        return gx, gg, gb

    return _make(out, (x, gamma, beta), rule, "layernorm")


# --------------------------------------------------------------------------
# spatial ops on (N, C, H, W)
# --------------------------------------------------------------------------

def _pad_np(x: np.ndarray, p: int, mode: str) -> np.ndarray:
    if p == 0:
        return x
    width = ((0, 0), (0, 0), (p, p), (p, p))
    if mode == "zero":
        return np.pad(x, width)
    if mode == "replicate":
        return np.pad(x, width, mode="edge")
    raise ValueError(f"unknown padding mode {mode!r}")


def _unpad_np(g: np.ndarray, p: int, mode: str) -> np.ndarray:
    if p == 0:
        return g
    if mode == "zero":
        return np.ascontiguousarray(g[:, :, p:-p, p:-p])
    # replicate: fold the border bands back onto the edge rows/columns
    g = g.copy()
    g[:, :, p, :] += g[:, :, :p, :].sum(axis=2)
    g[:, :, -p - 1, :] += g[:, :, -p:, :].sum(axis=2)
    g = g[:, :, p:-p, :]
    g[:, :, :, p] += g[:, :, :, :p].sum(axis=3)
    g[:, :, :, -p - 1] += g[:, :, :, -p:].sum(axis=3)
    return np.ascontiguousarray(g[:, :, :, p:-p])


def pad2d(x: Tensor, p: int, mode: str = "zero") -> Tensor:
    return _make(_pad_np(x.data, p, mode), (x,), lambda g: (_unpad_np(g, p, mode),), "pad2d")


def _out_extent(n: int, k: int, stride: int, dilation: int) -> int:
    return (n - dilation * (k - 1) - 1) // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1,
           padding: int = 0, dilation: int = 1, padding_mode: str = "zero") -> Tensor:
    """2-D cross-correlation of ``(N, C, H, W)`` by ``(O, C, kh, kw)``."""
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"conv2d shape mismatch: input {x.shape}, kernel {weight.shape}")
    n, c, h, w = x.shape
    o, _, kh, kw = weight.shape
    xp = _pad_np(x.data, padding, padding_mode)
    hp, wp = xp.shape[2:]
    if dilation * (kh - 1) + 1 > hp or dilation * (kw - 1) + 1 > wp:
        raise ValueError(f"kernel {kh}x{kw} (dilation {dilation}) larger than padded input {hp}x{wp}")
    ho = _out_extent(hp, kh, stride, dilation)
    wo = _out_extent(wp, kw, stride, dilation)
    cols = _kernels.im2col(xp, kh, kw, stride, dilation, ho, wo)
    wmat = weight.data.reshape(o, -1)
    out = np.matmul(wmat, cols)
    _add_macs(n * o * ho * wo * wmat.shape[1])
    if bias is not None:
        out += bias.data[None, :, None]
    out = out.reshape(n, o, ho, wo)

    def rule(g):
        g2 = g.reshape(n, o, ho * wo)
        gw = np.einsum("nol,nkl->ok", g2, cols).reshape(weight.shape)
        gcols = np.matmul(wmat.T, g2)
        gxp = _kernels.col2im(gcols, xp.shape, kh, kw, stride, dilation, ho, wo)
        gx = _unpad_np(gxp, padding, padding_mode)
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=(0, 2))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out, parents, rule, "conv2d")


def avgpool2d(x: Tensor, window: int, padding_mode: str = "replicate", stride: int = 1) -> Tensor:
    """Box average with ``window // 2`` padding (same-size output at stride 1)."""
    n, c, h, w = x.shape
    p = window // 2
    xp = _pad_np(x.data.reshape(n * c, 1, h, w), p, padding_mode)
    hp, wp = xp.shape[2:]
    if window > hp or window > wp:
        raise ValueError(f"pool window {window} larger than padded input {hp}x{wp}")
    ho = _out_extent(hp, window, stride, 1)
    wo = _out_extent(wp, window, stride, 1)
    cols = _kernels.im2col(xp, window, window, stride, 1, ho, wo)
    k = window * window
    out = cols.mean(axis=1).reshape(n, c, ho, wo)

    def rule(g):
        gcols = np.broadcast_to(g.reshape(n * c, 1, ho * wo) / k, (n * c, k, ho * wo))
        gxp = _kernels.col2im(np.ascontiguousarray(gcols), xp.shape, window, window, stride, 1, ho, wo)
        return (_unpad_np(gxp, p, padding_mode).reshape(n, c, h, w),)

    return _make(out, (x,), rule, "avgpool2d")


def interp_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Linear interpolation weights with half-pixel centers, ``(n_out, n_in)``."""
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for o in range(n_out):
        src = max((o + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(np.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        frac = src - i0
        m[o, i0] += 1.0 - frac
        m[o, i1] += frac
    return m


def upsample_bilinear(x: Tensor, size: tuple[int, int]) -> Tensor:
    """Bilinear resize of the last two axes to ``size``."""
    h, w = x.shape[-2:]
    if (h, w) == tuple(size):
        return x
    rh = interp_matrix(size[0], h)
    rw = interp_matrix(size[1], w)
    out = rh @ x.data @ rw.T
    return _make(out, (x,), lambda g: (rh.T @ g @ rw,), "upsample")


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

MAGIC = b"MTSR"
FORMAT_VERSION = 1


def tensor_to_bytes(t) -> bytes:
    arr = np.ascontiguousarray(t.data if isinstance(t, Tensor) else t, dtype="<f8")
    head = MAGIC + struct.pack("<II", FORMAT_VERSION, arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes(order="C")


def tensor_from_bytes(buf: bytes) -> Tensor:
    if buf[:4] != MAGIC:
        raise ValueError("not a tensor file: bad magic bytes")
    version, rank = struct.unpack_from("<II", buf, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported tensor format version {version}")
    shape = struct.unpack_from(f"<{rank}Q", buf, 12)
    offset = 12 + 8 * rank
    count = int(np.prod(shape)) if rank else 1
    if len(buf) - offset != 8 * count:
        raise ValueError(f"tensor payload is {len(buf) - offset} bytes, expected {8 * count}")
    data = np.frombuffer(buf, dtype="<f8", offset=offset, count=count)
    return Tensor(data.astype(np.float64).reshape(shape))


def save_tensor(t, path) -> None:
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(t))


def load_tensor(path) -> Tensor:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


__all__ = [
    "Tensor", "FlopCounter", "count_flops", "Tape", "Node", "NonFiniteError", "no_grad", "grad_enabled", "set_debug",
    "as_tensor", "backward", "add", "sub", "mul", "div", "hadamard", "exp", "log", "sigmoid",
    "relu", "gelu", "bce_with_logits", "sum", "mean", "reshape", "transpose", "index",
    "concat", "stack", "split", "matmul", "linear", "softmax", "layernorm", "pad2d", "conv2d",
    "avgpool2d", "upsample_bilinear", "interp_matrix", "tensor_to_bytes", "tensor_from_bytes",
    "save_tensor", "load_tensor",
]
