"""Training losses for frame prediction (FP) and flow reconstruction (FR).

Every ``||.||_2`` is the root of the sum of squares over the whole sample
tensor. Inputs are single samples (C, H, W) or batches (N, C, H, W); for a
batch the per-sample losses are averaged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor as T
from .errors import ShapeMismatch, TooSmall
from .tensor import Tensor

EPS_MD = 1e-3
MD_WEIGHT = 0.01
FP_WEIGHTS = {"l_p": 1.0, "l_vq": 1.0, "l_gd": 1.0}
FR_WEIGHTS = {"l_r": 1.0, "l_vq": 1.0, "l_sim": 1.0, "l_md": MD_WEIGHT}


def _same(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what}: {a.shape} vs {b.shape}")


def _per_sample(fn: Callable[..., Tensor], *xs: Tensor) -> Tensor:
    if xs[0].ndim < 4:
        return fn(*xs)
    n = xs[0].shape[0]
    total = None
    for i in range(n):
        term = fn(*(x[i] for x in xs))
        total = term if total is None else total + term
    return total / n


def prediction_loss(target: Tensor, pred: Tensor) -> Tensor:
    _same(target, pred, "prediction_loss")
    return _per_sample(lambda a, b: T.norm(a - b), target, pred)


def recon_loss(flow: Tensor, pred: Tensor) -> Tensor:
    _same(flow, pred, "recon_loss")
    return _per_sample(lambda a, b: T.norm(a - b), flow, pred)


def gradient_loss(target: Tensor, pred: Tensor) -> Tensor:
    """Unnormalized L1 gap between absolute vertical/horizontal differences."""
    _same(target, pred, "gradient_loss")
    if target.shape[-1] < 2 or target.shape[-2] < 2:
        raise TooSmall(f"gradient_loss needs H, W >= 2, got {target.shape[-2:]}")

    def one(a, b):
        dv_a = T.abs_(a[..., 1:, :] - a[..., :-1, :])
        dv_b = T.abs_(b[..., 1:, :] - b[..., :-1, :])
        dh_a = T.abs_(a[..., :, :-1] - a[..., :, 1:])
        dh_b = T.abs_(b[..., :, :-1] - b[..., :, 1:])
        return T.abs_(dv_a - dv_b).sum() + T.abs_(dh_a - dh_b).sum()
    return _per_sample(one, target, pred)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def ssim(a: Tensor, b: Tensor, data_range: float = 2.0, window: int = 11,
         sigma: float = 1.5) -> Tensor:
    """Mean SSIM over all valid window positions and channels of (C, H, W) inputs."""
    _same(a, b, "ssim")
    h, w = a.shape[-2:]
    if h < window or w < window:
        raise TooSmall(f"ssim needs H, W >= {window}, got {h}x{w}")
    c = a.shape[-3]
    g = gaussian_window(window, sigma).astype(a.dtype)
    kv = T.Tensor(np.tile(g[None, :, None], (c, 1, 1)))
    kh = T.Tensor(np.tile(g[None, None, :], (c, 1, 1)))

    def blur(x):
        return T.depthwise_conv2d(T.depthwise_conv2d(x, kv), kh)

    x = a.reshape(1, c, h, w)
    y = b.reshape(1, c, h, w)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_x = blur(x)
    mu_y = blur(y)
    mu_xx, mu_yy, mu_xy = mu_x * mu_x, mu_y * mu_y, mu_x * mu_y
    s_xx = blur(x * x) - mu_xx
    s_yy = blur(y * y) - mu_yy
    s_xy = blur(x * y) - mu_xy
    num = (mu_xy * 2.0 + c1) * (s_xy * 2.0 + c2)
    den = (mu_xx + mu_yy + c1) * (s_xx + s_yy + c2)
    return (num / den).mean()


def ssim_loss(flow: Tensor, pred: Tensor, data_range: float = 2.0) -> Tensor:
    _same(flow, pred, "ssim_loss")
    return _per_sample(lambda a, b: 1.0 - ssim(a, b, data_range), flow, pred)


def motion_diff_loss(flow: Tensor, pred: Tensor, prev_flow: Tensor, eps: float = EPS_MD) -> Tensor:
    """sqrt((||O_t - O_prev|| - ||pred - O_prev||)^2 + eps^2)."""
    _same(flow, pred, "motion_diff_loss")
    _same(flow, prev_flow, "motion_diff_loss")

    def one(o, p, prev):
        gap = T.norm(o - prev) - T.norm(p - prev)
        return T.sqrt(gap * gap + eps * eps)
    return _per_sample(one, flow, pred, prev_flow)


@dataclass
class LossReport:
    total: Tensor
    terms: dict[str, float] = field(default_factory=dict)
    weights: dict[str, float] = field(default_factory=dict)

    def recomputed_total(self) -> float:
        acc = np.float64(0.0)
        for k, v in self.terms.items():
            acc += self.weights[k] * v
        return float(acc)


def _weighted(parts: dict[str, Tensor | None], weights: dict[str, float]) -> LossReport:
    total = None
    terms = {}
    used = {}
    for name, value in parts.items():
        if value is None:
            continue
        w = weights[name]
        term = value if w == 1.0 else value * w
        total = term if total is None else total + term
        terms[name] = float(value.data)
        used[name] = w
    return LossReport(total=total, terms=terms, weights=used)


def composite_fp(l_p: Tensor, l_vq: Tensor, l_gd: Tensor) -> LossReport:
    return _weighted({"l_p": l_p, "l_vq": l_vq, "l_gd": l_gd}, FP_WEIGHTS)


def composite_fr(l_r: Tensor, l_vq: Tensor, l_sim: Tensor, l_md: Tensor | None) -> LossReport:
    """FR objective; ``l_md`` is None when no previous flow exists (clip start)."""
    return _weighted({"l_r": l_r, "l_vq": l_vq, "l_sim": l_sim, "l_md": l_md}, FR_WEIGHTS)
