"""Two-stage training: frame prediction (FP) first, then flow reconstruction (FR)
on top of the frozen best FP model.

A window ``(clip, k)`` feeds frames ``k .. k+t-1`` (stacked as channels) to FP,
whose target is frame ``k+t``. FR consumes FP's prediction of frame ``k+t`` and
regresses the flow from ``k+t-1`` to ``k+t``. The previous flow used by the
motion-difference term is the target of window ``k-1``, so the first window of
every clip trains without that term.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import losses as Lo
from . import tensor as T
from .checkpoint import load_checkpoint, load_model, save_checkpoint, save_model
from .errors import CheckpointMismatch, EmptyDataset, LabelLeak, NumericFailure
from .net import VqMauConfig, VqMauModel
from .optim import AdamW, clip_grad_norm
from .scoring import psnr
from .synthvid import SynClip
from .tensor import Tensor

# model overrides applied by default at desk scale (see README, "Desk configuration")
DESK_MODEL = {"base_channels": 16, "ssm_ratio": 1.0, "codebook_size": 128}
# optimizer step size used by the desk presets; the protocol default stays at 2e-4
DESK_LR = 3e-3


@dataclass
class TrainConfig:
    t: int = 16
    epochs: int = 4
    batch_size: int = 4
    lr: float = 2e-4
    lr_schedule: str = "constant"     # or "cosine" (decays to zero over the run)
    weight_decay: float = 1e-2
    grad_clip: float = 1.0
    seed: int = 0
    eval_every: int = 50
    checkpoint_dir: str = "runs"
    max_steps: int | None = None
    val_stride: int = 4
    init_output_bias: bool = False     # start the head bias at the mean training target
    model: dict = field(default_factory=lambda: dict(DESK_MODEL))

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class Window:
    clip: int
    start: int
    clip_id: str

    @property
    def sample_id(self) -> str:
        return f"{self.clip_id}:{self.start}"


@dataclass
class TrainResult:
    best_path: Path
    last_path: Path
    model: VqMauModel
    history: list[dict]
    best_metric: float
    steps: int


def clip_ids(clips: Sequence[SynClip], split: str) -> list[str]:
    return [f"{split}/clip_{i:03d}" for i in range(len(clips))]


def windows(clips: Sequence[SynClip], t: int, ids: Sequence[str] | None = None,
            stride: int = 1) -> list[Window]:
    """Every window with t input frames and one target frame inside a single clip."""
    ids = ids or clip_ids(clips, "train")
    out = []
    for i, clip in enumerate(clips):
        for k in range(0, clip.length - t, stride):
            out.append(Window(i, k, ids[i]))
    return out


def _tensor(model: VqMauModel, arr: np.ndarray) -> Tensor:
    """Wrap a batch in the model's working precision."""
    return Tensor(np.asarray(arr, dtype=model.config.dtype))


def fp_batch(clips, wins: Sequence[Window], t: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([clips[w.clip].frames[w.start:w.start + t] for w in wins])
    y = np.stack([clips[w.clip].frames[w.start + t][None] for w in wins])
    return x, y


def flow_target(clip: SynClip, start: int, t: int) -> np.ndarray:
    """Flow O from frame start+t-1 to start+t, channels first."""
    return np.moveaxis(clip.flows[start + t - 1], -1, 0)


def fp_model_config(cfg: TrainConfig, clips: Sequence[SynClip]) -> VqMauConfig:
    h, w = clips[0].frames.shape[1:]
    return VqMauConfig(in_channels=cfg.t, out_channels=1, height=h, width=w, **cfg.model)


def fr_model_config(cfg: TrainConfig, clips: Sequence[SynClip]) -> VqMauConfig:
    h, w = clips[0].frames.shape[1:]
    return VqMauConfig(in_channels=1, out_channels=2, height=h, width=w, **cfg.model)


def _check_training(clips: Sequence[SynClip], t: int) -> None:
    if not clips or not any(c.length > t for c in clips):
        raise EmptyDataset(f"no clip holds t+1 = {t + 1} consecutive frames")
    for i, c in enumerate(clips):
        if np.any(c.labels):
            raise LabelLeak(f"training clip {i} contains anomalous frames")


def _epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def _batches(cfg: TrainConfig, n: int):
    """(step, epoch, indices) for the whole run; order depends only on seed and epoch."""
    per_epoch = math.ceil(n / cfg.batch_size)
    total = cfg.epochs * per_epoch if cfg.max_steps is None else cfg.max_steps
    for step in range(total):
        epoch, b = divmod(step, per_epoch)
        order = _epoch_order(cfg.seed, epoch, n)
        yield step, epoch, order[b * cfg.batch_size:(b + 1) * cfg.batch_size]


def predict_frames(model: VqMauModel, clips, wins: Sequence[Window], t: int,
                   batch: int = 8) -> np.ndarray:
    """FP predictions (N, 1, H, W) in eval mode without recording a tape."""
    was = model.training
    model.eval()
    out = []
    with T.no_grad():
        for i in range(0, len(wins), batch):
            x, _ = fp_batch(clips, wins[i:i + batch], t)
            y, _ = model(_tensor(model, x))
            out.append(y.data)
    model.train(was)
    return np.concatenate(out) if out else np.zeros((0, 1) + clips[0].frames.shape[1:], np.float32)


def predict_flows(model: VqMauModel, frames: np.ndarray, batch: int = 8) -> np.ndarray:
    was = model.training
    model.eval()
    out = []
    with T.no_grad():
        for i in range(0, len(frames), batch):
            y, _ = model(_tensor(model, frames[i:i + batch]))
            out.append(y.data)
    model.train(was)
    return np.concatenate(out)


class _Run:
    """Shared bookkeeping: optimizer, checkpoints, CSV log, resume."""

    def __init__(self, name: str, model: VqMauModel, cfg: TrainConfig, out_dir: Path, columns):
        self.name = name
        self.model = model
        self.cfg = cfg
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.params = model.parameters()
        self.opt = AdamW(self.params, lr=cfg.lr, weight_decay=cfg.weight_decay)
        self.columns = ["step", "epoch", "total", *columns, "val", "samples"]
        self.best_path = self.out / f"{name}_best.vadm"
        self.last_path = self.out / f"{name}_last.vadm"
        self.csv_path = self.out / f"{name}_loss.csv"
        self.history: list[dict] = []
        self.start_step = 0
        self.best = -math.inf

    def resume(self) -> None:
        """Continue from ``<name>_last``: parameters, buffers, optimizer moments, step."""
        meta_path = self.last_path.with_suffix(".state.json")
        if not self.last_path.exists() or not meta_path.exists():
            raise CheckpointMismatch(f"no resumable state in {self.out}")
        self.model.load_state_dict(load_checkpoint(self.last_path))
        opt = load_checkpoint(self.last_path.with_suffix(".opt.vadm"))
        meta = json.loads(meta_path.read_text())
        for i in range(len(self.params)):
            self.opt.state.m[i][...] = opt[f"m.{i}"]
            self.opt.state.v[i][...] = opt[f"v.{i}"]
        self.opt.state.step = meta["opt_step"]
        self.start_step = meta["step"]
        self.best = meta["best"]
        if self.csv_path.exists():
            with open(self.csv_path) as f:
                self.history = [r for r in csv.DictReader(f) if int(r["step"]) < self.start_step]

    def save_last(self, step: int) -> None:
        save_model(self.last_path, self.model, self.model.config)
        opt = {}
        for i in range(len(self.params)):
            opt[f"m.{i}"] = self.opt.state.m[i]
            opt[f"v.{i}"] = self.opt.state.v[i]
        save_checkpoint(self.last_path.with_suffix(".opt.vadm"), opt)
        meta = {"step": step, "opt_step": self.opt.state.step, "best": self.best,
                "train_config": self.cfg.to_dict()}
        self.last_path.with_suffix(".state.json").write_text(json.dumps(meta))

    def update(self, report: Lo.LossReport, step: int, total_steps: int) -> None:
        total = float(report.total.data)
        if not math.isfinite(total):
            raise NumericFailure(f"{self.name}: non-finite loss {total}")
        self.opt.lr = scheduled_lr(self.cfg, step, total_steps)
        self.opt.zero_grad()
        T.backward(report.total)
        if self.cfg.grad_clip:
            clip_grad_norm(self.params, self.cfg.grad_clip)
        self.opt.step()

    def log(self, step, epoch, report: Lo.LossReport, wins, val=None) -> None:
        row = {"step": step, "epoch": epoch, "total": float(report.total.data)}
        for c in self.columns[3:-2]:
            row[c] = report.terms.get(c, "")
        row["val"] = "" if val is None else val
        row["samples"] = ";".join(w.sample_id for w in wins)
        self.history.append(row)

    def consider(self, metric: float) -> None:
        if metric > self.best:
            self.best = metric
            save_model(self.best_path, self.model, self.model.config)

    def write_csv(self) -> None:
        with open(self.csv_path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=self.columns)
            w.writeheader()
            w.writerows(self.history)


def set_output_bias(model: VqMauModel, mean) -> None:
    """Start the final linear map at the per-channel target mean.

    Adam moves a parameter by about ``lr`` per step, so a large constant offset
    between the initial output and the data would otherwise take hundreds of
    steps to remove before any structure is learned.
    """
    bias = model.final.head.bias
    bias.data[...] = np.asarray(mean, dtype=bias.dtype)


def scheduled_lr(cfg: TrainConfig, step: int, total_steps: int) -> float:
    if cfg.lr_schedule == "constant":
        return cfg.lr
    if cfg.lr_schedule == "cosine":
        return 0.5 * cfg.lr * (1.0 + math.cos(math.pi * step / max(total_steps, 1)))
    raise ValueError(f"unknown lr schedule {cfg.lr_schedule!r}")


def _due(cfg: TrainConfig, step: int, last: int) -> bool:
    return (step + 1) % cfg.eval_every == 0 or step == last


def _n_steps(cfg: TrainConfig, n: int) -> int:
    return cfg.max_steps if cfg.max_steps is not None else cfg.epochs * math.ceil(n / cfg.batch_size)


def validate_fp(model, val_clips, t: int, stride: int) -> float:
    wins = windows(val_clips, t, clip_ids(val_clips, "val"), stride=stride)
    preds = predict_frames(model, val_clips, wins, t)
    return float(np.mean([psnr(p[0], val_clips[w.clip].frames[w.start + t])
                          for p, w in zip(preds, wins)]))


def train_fp(train_clips: Sequence[SynClip], cfg: TrainConfig, val_clips: Sequence[SynClip] = (),
             out_dir=None, resume: bool = False, model_config: VqMauConfig | None = None) -> TrainResult:
    """Minimize L_FP over sliding windows; keep the checkpoint with the best
    validation prediction PSNR (training PSNR when no validation clip exists)."""
    _check_training(train_clips, cfg.t)
    val_clips = list(val_clips) or list(train_clips)
    mcfg = model_config or fp_model_config(cfg, train_clips)
    model = VqMauModel(mcfg, seed=cfg.seed)
    run = _Run("fp", model, cfg, out_dir or cfg.checkpoint_dir, ["l_p", "l_vq", "l_gd"])
    if resume:
        run.resume()
    elif cfg.init_output_bias:
        set_output_bias(model, [np.mean([c.frames[cfg.t:].mean() for c in train_clips])])
    wins = windows(train_clips, cfg.t)
    last = _n_steps(cfg, len(wins)) - 1
    model.train()
    for step, epoch, idx in _batches(cfg, len(wins)):
        if step < run.start_step:
            continue
        bw = [wins[i] for i in idx]
        x, y = fp_batch(train_clips, bw, cfg.t)
        target = _tensor(model, y)
        pred, l_vq = model(_tensor(model, x))
        report = Lo.composite_fp(Lo.prediction_loss(target, pred), l_vq,
                                 Lo.gradient_loss(target, pred))
        run.update(report, step, last + 1)
        val = None
        if _due(cfg, step, last):
            val = validate_fp(model, val_clips, cfg.t, cfg.val_stride)
            run.consider(val)
        run.log(step, epoch, report, bw, val)
    run.save_last(last + 1)
    run.write_csv()
    return TrainResult(run.best_path, run.last_path, model, run.history, run.best, last + 1)


def _fr_inputs(fp_model, clips, t):
    wins = windows(clips, t)
    preds = predict_frames(fp_model, clips, wins, t)
    return wins, preds


def validate_fr(model, preds: np.ndarray, clips, wins, t: int) -> float:
    flows = predict_flows(model, preds)
    errs = [np.sqrt(np.sum((f - flow_target(clips[w.clip], w.start, t)) ** 2))
            for f, w in zip(flows, wins)]
    return float(np.mean(errs))


def train_fr(train_clips: Sequence[SynClip], fp_ckpt, cfg: TrainConfig,
             val_clips: Sequence[SynClip] = (), out_dir=None, resume: bool = False,
             model_config: VqMauConfig | None = None) -> TrainResult:
    """Train FR on predictions of the frozen FP model loaded from ``fp_ckpt``.

    FP runs in eval mode with no tape, so its parameters never receive a gradient
    and its predictions are computed once per window and reused.
    """
    _check_training(train_clips, cfg.t)
    fp_model, fp_cfg = load_model(fp_ckpt)
    h, w = train_clips[0].frames.shape[1:]
    if fp_cfg.in_channels != cfg.t or (fp_cfg.height, fp_cfg.width) != (h, w):
        raise CheckpointMismatch(
            f"FP checkpoint expects t={fp_cfg.in_channels} at {fp_cfg.height}x{fp_cfg.width}; "
            f"data has t={cfg.t} at {h}x{w}")
    val_clips = list(val_clips) or list(train_clips)
    mcfg = model_config or fr_model_config(cfg, train_clips)
    model = VqMauModel(mcfg, seed=cfg.seed + 1)
    run = _Run("fr", model, cfg, out_dir or cfg.checkpoint_dir, ["l_r", "l_vq", "l_sim", "l_md"])
    if resume:
        run.resume()
    wins, preds = _fr_inputs(fp_model, train_clips, cfg.t)
    if not resume and cfg.init_output_bias:
        set_output_bias(model, np.mean([flow_target(train_clips[w.clip], w.start, cfg.t).mean(axis=(1, 2))
                                        for w in wins], axis=0))
    vwins = windows(val_clips, cfg.t, clip_ids(val_clips, "val"), stride=cfg.val_stride)
    vpreds = predict_frames(fp_model, val_clips, vwins, cfg.t)
    last = _n_steps(cfg, len(wins)) - 1
    model.train()
    for step, epoch, idx in _batches(cfg, len(wins)):
        if step < run.start_step:
            continue
        bw = [wins[i] for i in idx]
        flows = np.stack([flow_target(train_clips[w.clip], w.start, cfg.t) for w in bw])
        out, l_vq = model(_tensor(model, preds[idx]))
        target = _tensor(model, flows)
        l_r = Lo.recon_loss(target, out)
        l_sim = Lo.ssim_loss(target, out)
        # previous target flow exists for every window except a clip's first
        has_prev = [j for j, w in enumerate(bw) if w.start > 0]
        l_md = None
        if has_prev:
            prev = np.stack([flow_target(train_clips[bw[j].clip], bw[j].start - 1, cfg.t)
                             for j in has_prev])
            sel = T.stack([out[j] for j in has_prev], axis=0) if len(has_prev) < len(bw) else out
            tgt = _tensor(model, flows[has_prev])
            l_md = Lo.motion_diff_loss(tgt, sel, _tensor(model, prev))
        report = Lo.composite_fr(l_r, l_vq, l_sim, l_md)
        run.update(report, step, last + 1)
        val = None
        if _due(cfg, step, last):
            val = validate_fr(model, vpreds, val_clips, vwins, cfg.t)
            run.consider(-val)
        run.log(step, epoch, report, bw, val)
    run.save_last(last + 1)
    run.write_csv()
    return TrainResult(run.best_path, run.last_path, model, run.history, -run.best, last + 1)
