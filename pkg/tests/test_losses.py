import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vadmamba import losses as L
from vadmamba import tensor as T
from vadmamba.errors import ShapeMismatch, TooSmall

from gradcheck import check


def t(x):
    return T.Tensor(np.asarray(x, np.float64))


def test_prediction_loss_anchors():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, 8, 8))
    assert float(L.prediction_loss(t(x), t(x)).data) == 0.0
    n = 1 * 8 * 8
    val = float(L.prediction_loss(t(np.zeros_like(x)), t(np.full_like(x, 0.5))).data)
    assert val == pytest.approx(0.5 * np.sqrt(n), rel=1e-14)


def test_batch_losses_average_per_sample_norms():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((3, 1, 4, 4)), rng.standard_normal((3, 1, 4, 4))
    expected = np.mean([np.linalg.norm(a[i] - b[i]) for i in range(3)])
    assert float(L.prediction_loss(t(a), t(b)).data) == pytest.approx(expected, rel=1e-13)


def test_gradient_loss_anchors():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((1, 6, 6))
    assert float(L.gradient_loss(t(x), t(x)).data) == 0.0
    assert float(L.gradient_loss(t(np.full((1, 5, 5), 0.3)), t(np.full((1, 5, 5), -0.7))).data) == 0.0


def test_gradient_loss_two_by_two_by_hand():
    target = [[[0.0, 1.0], [2.0, 4.0]]]
    pred = [[[1.0, 1.0], [0.0, 3.0]]]
    # vertical: |2-0| vs |0-1|, |4-1| vs |3-1|; horizontal: |0-1| vs |1-1|, |2-4| vs |0-3|
    assert float(L.gradient_loss(t(target), t(pred)).data) == 4.0


def test_gradient_loss_too_small():
    with pytest.raises(TooSmall):
        L.gradient_loss(t(np.zeros((1, 1, 4))), t(np.zeros((1, 1, 4))))


def test_recon_loss_anchors():
    rng = np.random.default_rng(3)
    o = rng.standard_normal((2, 8, 8))
    assert float(L.recon_loss(t(o), t(o)).data) == 0.0
    p = o.copy()
    p[1, 3, 4] += 1.0
    assert float(L.recon_loss(t(o), t(p)).data) == pytest.approx(1.0, abs=1e-15)
    q = rng.standard_normal(o.shape)
    assert float(L.recon_loss(t(o), t(q)).data) == pytest.approx(np.sqrt(((o - q) ** 2).sum()), rel=1e-13)


def ssim_direct(a, b, data_range=2.0, size=11, sigma=1.5):
    """SSIM by explicit weighted sums over every valid window."""
    g = L.gaussian_window(size, sigma)
    w2 = np.outer(g, g)
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    vals = []
    for ch in range(a.shape[0]):
        for i in range(a.shape[1] - size + 1):
            for j in range(a.shape[2] - size + 1):
                pa = a[ch, i:i + size, j:j + size]
                pb = b[ch, i:i + size, j:j + size]
                ma, mb = (w2 * pa).sum(), (w2 * pb).sum()
                va = (w2 * pa * pa).sum() - ma * ma
                vb = (w2 * pb * pb).sum() - mb * mb
                cov = (w2 * pa * pb).sum() - ma * mb
                vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_ssim_loss_identical_is_zero():
    o = np.random.default_rng(4).uniform(-1, 1, (2, 16, 16))
    assert abs(float(L.ssim_loss(t(o), t(o)).data)) <= 1e-6


def test_ssim_anticorrelated_exceeds_one():
    # a checkerboard has (near) zero mean under every Gaussian window, not only globally
    i, j = np.indices((16, 16))
    o = np.stack([0.8 * (-1.0) ** (i + j), 0.5 * (-1.0) ** (i + j + 1)])
    assert float(L.ssim_loss(t(o), t(-o)).data) > 1.0


def test_ssim_matches_direct_summation():
    rng = np.random.default_rng(6)
    a = rng.uniform(-1, 1, (2, 14, 15))
    b = np.clip(a + 0.3 * rng.standard_normal(a.shape), -1, 1)
    assert abs(float(L.ssim(t(a), t(b)).data) - ssim_direct(a, b)) <= 1e-6


def test_ssim_too_small():
    with pytest.raises(TooSmall):
        L.ssim(t(np.zeros((1, 8, 8))), t(np.zeros((1, 8, 8))))


def test_motion_diff_perfect_reconstruction_is_epsilon():
    rng = np.random.default_rng(7)
    o, prev = rng.standard_normal((2, 8, 8)), rng.standard_normal((2, 8, 8))
    assert L.EPS_MD == 0.001
    assert float(L.motion_diff_loss(t(o), t(o), t(prev)).data) == 0.001


def test_motion_diff_constructed_norms():
    prev = np.zeros((2, 4, 4))
    o = np.zeros_like(prev)
    o[0, 0, 0], o[1, 2, 3] = 3.0 * 0.6, 3.0 * 0.8   # ||O - prev|| = 3
    val = float(L.motion_diff_loss(t(o), t(prev), t(prev)).data)   # ||pred - prev|| = 0
    assert val == pytest.approx(np.sqrt(9 + 1e-6), rel=1e-14)


def test_motion_diff_gradient_finite_at_kink():
    rng = np.random.default_rng(8)
    o, prev = rng.standard_normal((2, 5, 5)), rng.standard_normal((2, 5, 5))
    p = T.parameter(o.copy())
    T.backward(L.motion_diff_loss(t(o), p, t(prev)))
    assert np.all(np.isfinite(p.grad))


def test_composite_weights():
    assert L.FP_WEIGHTS == {"l_p": 1.0, "l_vq": 1.0, "l_gd": 1.0}
    assert L.FR_WEIGHTS == {"l_r": 1.0, "l_vq": 1.0, "l_sim": 1.0, "l_md": 0.01}
    z = t(0.0)
    rep = L.composite_fr(z, z, z, t(0.001))
    assert float(rep.total.data) == pytest.approx(1e-5, rel=1e-12)


@given(st.lists(st.floats(0, 100), min_size=4, max_size=4))
def test_report_total_matches_recomputed_sum(v):
    rep = L.composite_fr(*(t(x) for x in v))
    assert float(rep.total.data) == pytest.approx(rep.recomputed_total(), rel=1e-12, abs=1e-12)
    rep = L.composite_fp(*(t(x) for x in v[:3]))
    assert float(rep.total.data) == pytest.approx(sum(v[:3]), rel=1e-12, abs=1e-12)


def test_composite_fr_without_motion_term():
    rep = L.composite_fr(t(1.0), t(2.0), t(3.0), None)
    assert float(rep.total.data) == 6.0 and "l_md" not in rep.terms


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        L.prediction_loss(t(np.zeros((1, 4, 4))), t(np.zeros((1, 4, 5))))


# -- gradients (f64) ----------------------------------------------------------

RNG = np.random.default_rng(9)


@pytest.mark.parametrize("name,fn,shapes", [
    ("l_p", L.prediction_loss, [(2, 1, 6, 6)] * 2),
    ("l_gd", L.gradient_loss, [(2, 1, 6, 6)] * 2),
    ("l_r", L.recon_loss, [(2, 2, 6, 6)] * 2),
    ("l_sim", L.ssim_loss, [(2, 2, 12, 12)] * 2),
    ("l_md", L.motion_diff_loss, [(2, 2, 6, 6)] * 3),
])
def test_loss_gradients(name, fn, shapes):
    arrays = [RNG.uniform(-1, 1, s) for s in shapes]
    assert check(fn, arrays) <= 1e-4


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vq_loss_gradient_property(seed):
    from vadmamba.vq import BETA, vq_loss
    from gradcheck import analytic_grads, numeric_grad, rel_err
    r = np.random.default_rng(seed)
    ze, zq = r.standard_normal((3, 4)), r.standard_normal((3, 4))
    # w.r.t. z_e only the commitment term is live; the codebook term sees sg(z_e)
    g = analytic_grads(lambda a, b: vq_loss(a, b), [ze, zq])
    num_e, _ = numeric_grad(lambda a: BETA * np.linalg.norm(a - zq), [ze], 0)
    num_q, _ = numeric_grad(lambda b: np.linalg.norm(ze - b), [zq], 0)
    assert rel_err(g[0], num_e) <= 1e-6
    assert rel_err(g[1], num_q) <= 1e-6
