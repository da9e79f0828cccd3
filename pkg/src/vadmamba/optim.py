"""AdamW with decoupled weight decay, plus global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MissingGrad, ShapeMismatch
from .tensor import Tensor


@dataclass
class AdamWState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


class AdamW:
    def __init__(self, params: Sequence[Tensor], lr: float = 2e-4, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 1e-2):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = AdamWState(
            m=[np.zeros_like(p.data) for p in self.params],
            v=[np.zeros_like(p.data) for p in self.params])

    def step(self) -> None:
        adamw_step(self.params, self.state, self.lr, self.weight_decay, self.betas, self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def adamw_step(params: Sequence[Tensor], state: AdamWState, lr: float = 2e-4,
               wd: float = 1e-2, betas=(0.9, 0.999), eps: float = 1e-8) -> None:
    """One in-place AdamW update. Gradients are left for the caller to zero."""
    if len(state.m) != len(params):
        raise ShapeMismatch("optimizer state does not match parameter list")
    b1, b2 = betas
    state.step += 1
    t = state.step
    c1 = 1 - b1 ** t
    c2 = 1 - b2 ** t
    for p, m, v in zip(params, state.m, state.v):
        if p.grad is None:
            raise MissingGrad(f"parameter {p.name or p.shape} has no gradient")
        if m.shape != p.shape:
            raise ShapeMismatch(f"moment shape {m.shape} != parameter {p.shape}")
        g = p.grad
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        if wd:
            p.data *= p.dtype.type(1 - lr * wd)
        update = (m / c1) / (np.sqrt(v / c2) + eps)
        p.data -= (lr * update).astype(p.dtype)


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float((p.grad.astype(np.float64) ** 2).sum())
                              for p in params if p.grad is not None)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * p.dtype.type(scale)
    return total
