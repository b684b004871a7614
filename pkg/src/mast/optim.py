"""Adam with bias correction and a step-decay learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NonFiniteError, Tensor


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              lr: float, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> None:
    """One in-place Adam update of ``params``."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    for p, m in zip(params, state.m):
        if p.shape != m.shape:
            raise ValueError(f"optimizer state shape {m.shape} does not match parameter {p.shape}")
    b1, b2 = betas
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


class Adam:
    def __init__(self, params: list[Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState()

    def step(self) -> None:
        grads = []
        for p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.isfinite(g).all():
                raise NonFiniteError("non-finite gradient reached the optimizer")
            grads.append(g)
        # parameters are rebound, never mutated in place: tensors stay
        # immutable for anything still holding the old buffer
        datas = [p.data.copy() for p in self.params]
        adam_step(datas, grads, self.state, self.lr, self.betas, self.eps)
        for p, d in zip(self.params, datas):
            p.data = d

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"step": np.array([float(self.state.step)])}
        for i, (m, v) in enumerate(zip(self.state.m, self.state.v)):
            out[f"m.{i}"] = m
            out[f"v.{i}"] = v
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.state.step = int(arrays["step"][0])
        n = len(self.params)
        if self.state.step:
            self.state.m = [np.array(arrays[f"m.{i}"], dtype=np.float64) for i in range(n)]
            self.state.v = [np.array(arrays[f"v.{i}"], dtype=np.float64) for i in range(n)]
        else:
            self.state.m, self.state.v = [], []


def step_decay(base_lr: float, epoch: int, factor: float = 0.5, period: int = 10) -> float:
    """Learning rate for ``epoch`` (0-based) under a multiply-every-period schedule."""
    return base_lr * factor ** (epoch // period)
