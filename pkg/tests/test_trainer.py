import csv
import hashlib

import numpy as np
import pytest

from vadmamba import losses as Lo
from vadmamba import synthvid as sv
from vadmamba.errors import CheckpointMismatch, EmptyDataset, LabelLeak
from vadmamba.trainer import (TrainConfig, clip_ids, flow_target, scheduled_lr, train_fp, train_fr,
                              windows)

TINY_MODEL = {"base_channels": 4, "ssm_ratio": 1.0, "codebook_size": 8, "d_state": 4}


@pytest.fixture(scope="module")
def data():
    cfg = sv.GeneratorConfig(height=32, width=32, frames=22, t=4, train_clips=2, val_clips=1, test_clips=3)
    return sv.generate_dataset(cfg, seed=3)


def tiny(**kw):
    base = dict(t=4, epochs=1, batch_size=2, lr=1e-3, eval_every=3, max_steps=6, model=dict(TINY_MODEL))
    base.update(kw)
    return TrainConfig(**base)


def _rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_defaults():
    cfg = TrainConfig()
    assert cfg.t == 16 and cfg.lr == 2e-4 and cfg.batch_size == 4 and cfg.grad_clip == 1.0
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        TrainConfig(t=0)


def test_windows_and_flow_target(data):
    clips = data.train
    wins = windows(clips, 4)
    assert len(wins) == 2 * (22 - 4)
    assert wins[0].sample_id == "train/clip_000:0"
    ft = flow_target(clips[0], 2, 4)
    np.testing.assert_array_equal(ft, np.moveaxis(clips[0].flows[5], -1, 0))
    assert clip_ids(clips, "val") == ["val/clip_000", "val/clip_001"]


def test_cosine_schedule():
    cfg = TrainConfig(lr=1.0, lr_schedule="cosine")
    assert scheduled_lr(cfg, 0, 10) == 1.0
    assert scheduled_lr(cfg, 5, 10) == pytest.approx(0.5)
    assert scheduled_lr(TrainConfig(lr=0.3), 7, 10) == 0.3


def test_training_guards(data):
    with pytest.raises(LabelLeak):
        train_fp(data.test, tiny())
    with pytest.raises(EmptyDataset):
        train_fp([], tiny())
    with pytest.raises(EmptyDataset):
        train_fp(data.train, tiny(t=22))


def test_fp_run_is_deterministic_and_logs_consistent_totals(data, tmp_path):
    a = train_fp(data.train, tiny(), data.val, tmp_path / "a")
    b = train_fp(data.train, tiny(), data.val, tmp_path / "b")
    ra, rb = _rows(tmp_path / "a" / "fp_loss.csv"), _rows(tmp_path / "b" / "fp_loss.csv")
    assert [r["total"] for r in ra] == [r["total"] for r in rb]
    assert len(ra) == a.steps == 6
    for r in ra:
        recomputed = sum(Lo.FP_WEIGHTS[k] * float(r[k]) for k in Lo.FP_WEIGHTS)
        assert float(r["total"]) == pytest.approx(recomputed, rel=1e-5)
        # only training clips ever feed a gradient
        assert all(s.startswith("train/") for s in r["samples"].split(";"))
    assert a.best_path.exists() and _digest(a.best_path) == _digest(b.best_path)
    assert [r["val"] != "" for r in ra] == [False, False, True, False, False, True]


def test_resume_continues_trace_exactly_at_f64(data, tmp_path):
    model = dict(TINY_MODEL, dtype="float64")
    full = train_fp(data.train, tiny(model=model, max_steps=6), data.val, tmp_path / "full")
    train_fp(data.train, tiny(model=model, max_steps=3), data.val, tmp_path / "part")
    train_fp(data.train, tiny(model=model, max_steps=6), data.val, tmp_path / "part", resume=True)
    ra, rb = _rows(tmp_path / "full" / "fp_loss.csv"), _rows(tmp_path / "part" / "fp_loss.csv")
    assert [r["step"] for r in rb] == [str(i) for i in range(6)]
    assert [r["total"] for r in ra] == [r["total"] for r in rb]
    assert full.steps == 6


def test_resume_without_state(data, tmp_path):
    with pytest.raises(CheckpointMismatch):
        train_fp(data.train, tiny(), data.val, tmp_path, resume=True)


@pytest.fixture(scope="module")
def fp_ckpt(data, tmp_path_factory):
    out = tmp_path_factory.mktemp("fp")
    return train_fp(data.train, tiny(), data.val, out).best_path


def test_fr_leaves_fp_untouched_and_skips_first_window_motion_term(data, fp_ckpt, tmp_path):
    before = _digest(fp_ckpt)
    res = train_fr(data.train, fp_ckpt, tiny(batch_size=1, max_steps=12), data.val, tmp_path)
    assert _digest(fp_ckpt) == before
    rows = _rows(tmp_path / "fr_loss.csv")
    assert len(rows) == res.steps == 12
    for r in rows:
        start = int(r["samples"].split(":")[1])
        assert (r["l_md"] == "") == (start == 0)
        recomputed = sum(Lo.FR_WEIGHTS[k] * float(r[k]) for k in Lo.FR_WEIGHTS if r[k] != "")
        assert float(r["total"]) == pytest.approx(recomputed, rel=1e-5)


def test_fr_rejects_mismatched_fp(data, fp_ckpt, tmp_path):
    with pytest.raises(CheckpointMismatch):
        train_fr(data.train, fp_ckpt, tiny(t=3), data.val, tmp_path)
