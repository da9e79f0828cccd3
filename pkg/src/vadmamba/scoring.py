"""Inference-time anomaly scoring: PSNR, min-max normalization, temporal
smoothing, frame-level AUC and clip-level fusion of the two score streams.

Emitted scores are oriented so that 1 means anomalous: ``1 - normalized PSNR``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptySeries, InvalidSigma, LengthMismatch, Misalignment, ShapeMismatch

PSNR_CAP = 100.0


def psnr(a, b, peak: float = 2.0) -> float:
    """10 log10(peak^2 / MSE) in dB; identical inputs give ``PSNR_CAP``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"psnr: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def normalize_scores(series) -> np.ndarray:
    """Min-max map to [0, 1]; a constant series maps to 0.5 everywhere."""
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise EmptySeries("cannot normalize an empty series")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.full_like(x, 0.5)
    return (x - lo) / (hi - lo)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(series, sigma: float = 3.0) -> np.ndarray:
    """Convolve with a normalized Gaussian (radius ceil(3 sigma)), reflect padding."""
    if not sigma > 0:
        raise InvalidSigma(f"sigma must be positive, got {sigma}")
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise EmptySeries("cannot smooth an empty series")
    k = gaussian_kernel1d(sigma)
    r = len(k) // 2
    if x.size == 1:
        return x.copy()
    padded = np.pad(x, r, mode="reflect")
    return np.convolve(padded, k, mode="valid")


def anomaly_scores(psnrs, sigma: float | None = 3.0) -> np.ndarray:
    """Per-clip PSNR series -> smoothed anomaly score in [0, 1] (normalize, then smooth)."""
    s = 1.0 - normalize_scores(psnrs)
    if sigma:
        s = np.clip(gaussian_smooth(s, sigma), 0.0, 1.0)
    return s


NORM_SCOPES = ("clip", "global")


def anomaly_scores_set(series, sigma: float | None = 3.0, scope: str = "clip") -> list[np.ndarray]:
    """Anomaly scores for several clips.

    ``scope="clip"`` normalizes each clip by its own PSNR range; ``"global"`` uses
    the range over all clips together. Smoothing always runs within a clip.
    """
    if scope not in NORM_SCOPES:
        raise ValueError(f"normalization scope must be one of {NORM_SCOPES}, got {scope!r}")
    series = [np.asarray(x, dtype=np.float64) for x in series]
    if scope == "clip":
        return [anomaly_scores(x, sigma) for x in series]
    flat = normalize_scores(np.concatenate(series))
    out, i = [], 0
    for x in series:
        s = 1.0 - flat[i:i + len(x)]
        i += len(x)
        if sigma:
            s = np.clip(gaussian_smooth(s, sigma), 0.0, 1.0)
        out.append(s)
    return out


def is_degenerate(labels) -> bool:
    lab = np.asarray(labels)
    return bool(lab.size == 0 or lab.min() == lab.max())


def frame_auc(scores, labels) -> float:
    """P(anomalous frame outscores normal frame), ties counted 1/2.

    Returns 0.5 when only one class is present; check ``is_degenerate``.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise LengthMismatch(f"{s.shape[0] if s.ndim else 0} scores vs {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class ScoreSeries:
    clip_id: str
    s_p: np.ndarray
    s_r: np.ndarray
    fused: np.ndarray
    labels: np.ndarray
    choice: str = "FP"   # which stream the fused series copies

    def __post_init__(self):
        n = len(self.labels)
        if not (len(self.s_p) == len(self.s_r) == len(self.fused) == n):
            raise Misalignment(f"clip {self.clip_id}: series lengths differ")


@dataclass
class FusionResult:
    clips: list[ScoreSeries]
    auc: float
    degenerate: bool


def fuse_clip(clip_id: str, s_p, s_r, labels) -> ScoreSeries:
    """Keep whichever stream has the higher clip AUC; ties keep the FP stream."""
    s_p = np.asarray(s_p, dtype=np.float64)
    s_r = np.asarray(s_r, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if not (len(s_p) == len(s_r) == len(labels)):
        raise Misalignment(f"clip {clip_id}: {len(s_p)}/{len(s_r)}/{len(labels)} frames")
    if frame_auc(s_p, labels) >= frame_auc(s_r, labels):
        return ScoreSeries(clip_id, s_p, s_r, s_p.copy(), labels, "FP")
    return ScoreSeries(clip_id, s_p, s_r, s_r.copy(), labels, "FR")


def clip_fusion(clips: Sequence[tuple]) -> FusionResult:
    """Fuse each (s_p, s_r, labels[, clip_id]) clip, then score the concatenation."""
    fused = []
    for i, item in enumerate(clips):
        s_p, s_r, labels = item[:3]
        clip_id = item[3] if len(item) > 3 else f"{i:03d}"
        fused.append(fuse_clip(clip_id, s_p, s_r, labels))
    if not fused:
        raise EmptySeries("no clips to fuse")
    scores = np.concatenate([c.fused for c in fused])
    labels = np.concatenate([c.labels for c in fused])
    return FusionResult(fused, frame_auc(scores, labels), is_degenerate(labels))


def overall_auc(series: Sequence[np.ndarray], labels: Sequence[np.ndarray]) -> float:
    return frame_auc(np.concatenate(series), np.concatenate(labels))
