import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from vadmamba import scoring as S
from vadmamba.errors import EmptySeries, InvalidSigma, LengthMismatch, Misalignment


def pairwise_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def test_psnr_anchors():
    a = np.random.default_rng(0).uniform(-1, 1, (8, 8))
    assert S.psnr(a, a) == 100.0
    b = a + 0.1   # MSE = 0.01
    assert S.psnr(a, b, peak=1.0) == pytest.approx(20.0, abs=1e-9)
    assert S.psnr(a, b) == pytest.approx(20.0 + 20 * np.log10(2.0), abs=1e-9)


def test_psnr_monotone_in_noise():
    rng = np.random.default_rng(1)
    a = rng.uniform(-1, 1, (16, 16))
    noise = rng.standard_normal(a.shape)
    values = [S.psnr(a, a + s * noise) for s in (0.01, 0.03, 0.1, 0.3, 1.0)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_normalize_examples():
    np.testing.assert_allclose(S.normalize_scores([10, 20, 30]), [0, 0.5, 1])
    np.testing.assert_array_equal(S.normalize_scores([7, 7, 7]), [0.5, 0.5, 0.5])
    with pytest.raises(EmptySeries):
        S.normalize_scores([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60))
def test_normalize_endpoints(xs):
    assume(max(xs) > min(xs))
    n = S.normalize_scores(xs)
    assert n.min() == 0.0 and n.max() == 1.0
    assert n[int(np.argmin(xs))] == 0.0 and n[int(np.argmax(xs))] == 1.0


def test_smoothing_constant_and_impulse():
    np.testing.assert_allclose(S.gaussian_smooth(np.full(30, 0.4), 3.0), 0.4, atol=1e-15)
    k = S.gaussian_kernel1d(3.0)
    r = len(k) // 2
    x = np.zeros(60)
    x[30] = 1.0
    out = S.gaussian_smooth(x, 3.0)
    np.testing.assert_allclose(out[30 - r:30 + r + 1], k, atol=1e-15)
    assert out.sum() == pytest.approx(1.0, abs=1e-6)


def test_smoothing_impulse_near_edge_reflects():
    k = S.gaussian_kernel1d(2.0)
    x = np.zeros(20)
    x[1] = 1.0
    out = S.gaussian_smooth(x, 2.0)
    # reflect padding mirrors the impulse about index 0, so index 0 receives two taps
    r = len(k) // 2
    assert out[0] == pytest.approx(k[r - 1] + k[r + 1], abs=1e-15)


def test_smoothing_errors():
    with pytest.raises(InvalidSigma):
        S.gaussian_smooth([1.0, 2.0], 0.0)
    with pytest.raises(EmptySeries):
        S.gaussian_smooth([], 1.0)


@given(st.lists(st.floats(0, 50), min_size=1, max_size=80), st.floats(0.5, 6))
def test_anomaly_scores_stay_in_unit_interval(psnrs, sigma):
    s = S.anomaly_scores(psnrs, sigma)
    assert np.all((s >= 0) & (s <= 1))


def test_auc_examples():
    assert S.frame_auc([0.1, 0.9, 0.8], [0, 1, 0]) == 1.0
    assert S.frame_auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert S.frame_auc([0.1, 0.2], [1, 1]) == 0.5 and S.is_degenerate([1, 1])
    with pytest.raises(LengthMismatch):
        S.frame_auc([0.1, 0.2], [1])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 200))
def test_auc_matches_pairwise_counting(seed, n):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.uniform(0, 1, n), int(rng.integers(1, 4)))   # rounding forces ties
    labels = rng.integers(0, 2, n)
    assume(0 < labels.sum() < n)
    assert abs(S.frame_auc(scores, labels) - pairwise_auc(scores, labels)) <= 1e-12
    assert S.frame_auc(-scores, labels) == pytest.approx(1 - S.frame_auc(scores, labels), abs=1e-12)


def test_fusion_tie_keeps_fp():
    s = np.array([0.1, 0.9, 0.2, 0.8])
    lab = np.array([0, 1, 0, 1])
    c = S.fuse_clip("a", s, np.array([0.3, 0.7, 0.4, 0.6]), lab)   # both AUC 1
    assert c.choice == "FP"
    np.testing.assert_array_equal(c.fused, s)


def test_fusion_picks_better_stream():
    lab = np.array([0, 0, 1, 1, 0])
    s_p = np.array([0.1, 0.6, 0.5, 0.9, 0.2])   # AUC 5/6
    s_r = np.array([0.1, 0.2, 0.8, 0.9, 0.3])   # AUC 1
    c = S.fuse_clip("b", s_p, s_r, lab)
    assert c.choice == "FR"
    np.testing.assert_array_equal(c.fused, s_r)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fused_clip_auc_is_max_of_streams(seed):
    rng = np.random.default_rng(seed)
    clips = []
    for i in range(int(rng.integers(1, 5))):
        n = int(rng.integers(2, 40))
        lab = rng.integers(0, 2, n)
        clips.append((rng.uniform(0, 1, n), np.round(rng.uniform(0, 1, n), 1), lab, f"c{i}"))
    res = S.clip_fusion(clips)
    for (s_p, s_r, lab, _), c in zip(clips, res.clips):
        assert S.frame_auc(c.fused, lab) == max(S.frame_auc(s_p, lab), S.frame_auc(s_r, lab))
        assert c.choice == ("FP" if S.frame_auc(s_p, lab) >= S.frame_auc(s_r, lab) else "FR")


def test_fusion_errors():
    with pytest.raises(Misalignment):
        S.fuse_clip("x", [0.1, 0.2], [0.1], [0, 1])
    with pytest.raises(EmptySeries):
        S.clip_fusion([])
