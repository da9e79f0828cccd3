import numpy as np
import pytest

from vadmamba import tensor as T
from vadmamba.checkpoint import load_checkpoint, load_model, save_checkpoint, save_model
from vadmamba.errors import CheckpointMismatch, CorruptFile, MissingGrad
from vadmamba.net import VqMauConfig, VqMauModel
from vadmamba.optim import AdamW, clip_grad_norm


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    state = {"a.w": rng.standard_normal((3, 4)).astype(np.float32), "b": rng.standard_normal(5),
             "scalar": np.array(2.5), "empty": np.zeros((0, 3), np.float32)}
    save_checkpoint(tmp_path / "x.vadm", state)
    back = load_checkpoint(tmp_path / "x.vadm")
    assert list(back) == list(state)
    for k in state:
        assert back[k].dtype == state[k].dtype
        np.testing.assert_array_equal(back[k], state[k])


@pytest.mark.parametrize("mangle", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:-3],
    lambda b: b[:4] + (99).to_bytes(4, "little") + b[8:],
])
def test_corrupt_checkpoints(tmp_path, mangle):
    p = tmp_path / "x.vadm"
    save_checkpoint(p, {"w": np.ones((2, 2), np.float32)})
    p.write_bytes(mangle(p.read_bytes()))
    with pytest.raises(CorruptFile):
        load_checkpoint(p)


def test_model_round_trip(tmp_path):
    cfg = VqMauConfig(in_channels=2, out_channels=1, base_channels=4, height=32, width=32,
                      codebook_size=8, d_state=4, ssm_ratio=1.0)
    model = VqMauModel(cfg, seed=3)
    save_model(tmp_path / "m.vadm", model, cfg)
    back, cfg2 = load_model(tmp_path / "m.vadm", seed=99)
    assert cfg2 == cfg
    x = T.Tensor(np.random.default_rng(1).uniform(-1, 1, (1, 2, 32, 32)).astype(np.float32))
    model.eval()
    back.eval()
    with T.no_grad():
        np.testing.assert_array_equal(model(x)[0].data, back(x)[0].data)
    (tmp_path / "m.json").unlink()
    with pytest.raises(CheckpointMismatch):
        load_model(tmp_path / "m.vadm")


def test_zero_gradient_only_decays():
    p = T.parameter(np.array([1.0, -2.0, 3.0]))
    opt = AdamW([p], lr=0.1, weight_decay=0.5)
    for _ in range(4):
        p.grad = np.zeros(3)
        opt.step()
    np.testing.assert_allclose(p.data, np.array([1.0, -2.0, 3.0]) * 0.95 ** 4, rtol=1e-14)


def test_first_step_moves_by_lr():
    # bias-corrected Adam's first update is lr * sign(g) (up to eps)
    p = T.parameter(np.array([0.5, -0.5]))
    opt = AdamW([p], lr=0.01, weight_decay=0.0)
    p.grad = np.array([3.0, -1e-3])
    opt.step()
    np.testing.assert_allclose(p.data, [0.49, -0.49], atol=1e-7)


def test_descends_quadratic():
    p = T.parameter(np.array([2.0]))
    opt = AdamW([p], lr=0.05, weight_decay=0.0)
    for _ in range(200):
        opt.zero_grad()
        T.backward((p * p).sum())
        opt.step()
    assert abs(p.data[0]) < 0.05


def test_missing_grad():
    p = T.parameter(np.zeros(2))
    with pytest.raises(MissingGrad):
        AdamW([p]).step()


def test_clip_grad_norm():
    a, b = T.parameter(np.zeros(2)), T.parameter(np.zeros(1))
    a.grad, b.grad = np.array([3.0, 0.0]), np.array([4.0])
    assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose(np.concatenate([a.grad, b.grad]), [0.6, 0.0, 0.8], rtol=1e-10)
    assert clip_grad_norm([a, b], 10.0) == pytest.approx(1.0)
    np.testing.assert_allclose(a.grad, [0.6, 0.0], rtol=1e-10)
