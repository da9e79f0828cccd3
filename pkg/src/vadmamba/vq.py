"""Vector-quantization bottleneck with a straight-through gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimMismatch, EmptyCodebook, ShapeMismatch
from .module import Module
from .tensor import Tensor

BETA = 0.25


@dataclass
class QuantizeResult:
    z_q: Tensor           # forward value: exact codebook rows; gradient flows to z_e
    indices: np.ndarray   # (..., ) code index per spatial site
    vq_loss: Tensor


def nearest_codes(z: np.ndarray, codebook: np.ndarray, block: int = 16384) -> np.ndarray:
    """Index of the closest codebook row (squared L2) for every row of ``z``.

    Distances are formed from explicit differences, so ties resolve to the
    smallest index exactly as an exhaustive search would.
    """
    z = z.reshape(-1, codebook.shape[1])
    out = np.empty(len(z), dtype=np.int64)
    step = max(1, block // max(len(codebook), 1))
    for start in range(0, len(z), step):
        diff = z[start:start + step, None, :] - codebook[None, :, :]
        out[start:start + step] = np.argmin((diff * diff).sum(-1), axis=1)
    return out


def vq_loss(z_e: Tensor, z_q: Tensor, beta: float = BETA) -> Tensor:
    """||sg(z_e) - z_q|| + beta * ||z_e - sg(z_q)||, norms over the whole tensor."""
    if z_e.shape != z_q.shape:
        raise ShapeMismatch(f"vq_loss: {z_e.shape} vs {z_q.shape}")
    codebook_term = T.norm(z_e.detach() - z_q)
    commit_term = T.norm(z_e - z_q.detach())
    return codebook_term + commit_term * beta


def quantize(z_e: Tensor, codebook: Tensor, beta: float = BETA) -> QuantizeResult:
    """Replace every d-vector of ``z_e`` (..., d) with its nearest codebook row."""
    if codebook.ndim != 2 or codebook.shape[0] < 1:
        raise EmptyCodebook("codebook must be a non-empty (K, d) table")
    d = codebook.shape[1]
    if z_e.shape[-1] != d:
        raise DimMismatch(f"feature dim {z_e.shape[-1]} != code dim {d}")
    idx = nearest_codes(z_e.data, codebook.data).reshape(z_e.shape[:-1])
    codes = T.gather(codebook, idx)
    loss = vq_loss(z_e, codes, beta)
    z_q = T.straight_through(z_e, codes.detach())
    return QuantizeResult(z_q=z_q, indices=idx, vq_loss=loss)


class Codebook(Module):
    def __init__(self, rng: np.random.Generator, k: int = 512, d: int = 512, dtype=np.float32):
        super().__init__()
        if k < 1 or d < 1:
            raise EmptyCodebook(f"codebook needs K >= 1 and d >= 1, got {k}x{d}")
        self.embedding = T.parameter(rng.uniform(-1.0 / k, 1.0 / k, (k, d)).astype(dtype))

    @property
    def k(self) -> int:
        return self.embedding.shape[0]

    @property
    def d(self) -> int:
        return self.embedding.shape[1]

    def forward(self, z_e: Tensor, beta: float = BETA) -> QuantizeResult:
        return quantize(z_e, self.embedding, beta)
