import numpy as np
import pytest

from dualcausal import numerics as nm
from dualcausal import tci
from dualcausal.errors import InvalidArgumentError, ShapeError
from dualcausal.numerics import Param, Tensor
from dualcausal.tci import ApproximatorH, TextBank


def bank(C=4, D=8, seed=0, tau=0.07):
    return TextBank.from_prototypes(np.random.default_rng(seed).normal(size=(C, D)), tau)


def test_zero_frames_give_uniform_scores():
    s = tci.bias_scores(np.zeros((5, 8)), bank()).data
    assert np.array_equal(s, np.full((4, 5), 0.2))


def test_single_frame_scores_are_one():
    s = tci.bias_scores(np.random.default_rng(1).normal(size=(1, 8)), bank()).data
    assert np.all(s == 1.0)


def test_high_temperature_flattens_scores():
    s = tci.bias_scores(np.random.default_rng(2).normal(size=(6, 8)), bank(tau=1e6)).data
    assert np.max(s.max(-1) - s.min(-1)) < 1e-6


def test_score_rows_sum_to_one_on_1000_inputs():
    r = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        L = int(r.integers(1, 17))
        s = tci.bias_scores(r.normal(0, 3, (L, 8)), bank(seed=int(r.integers(1 << 30)))).data
        worst = max(worst, np.max(np.abs(s.sum(-1) - 1)))
    assert worst < 1e-9


def test_bias_scores_shape_error():
    with pytest.raises(ShapeError):
        tci.bias_scores(np.zeros((5, 7)), bank())


def test_bank_rejects_bad_tau():
    with pytest.raises(InvalidArgumentError):
        TextBank(Param(np.zeros((2, 3)), "t"), 0.0)


def test_uniform_scores_give_mean_frame():
    vp = np.random.default_rng(4).normal(size=(5, 8))
    b = tci.bias_embeddings(np.full((4, 5), 0.2), vp).data
    assert np.allclose(b, vp.mean(0), atol=1e-15)


def test_one_hot_scores_pick_frame():
    vp = np.random.default_rng(5).normal(size=(5, 8))
    s = np.zeros((4, 5))
    s[:, 3] = 1.0
    assert np.array_equal(tci.bias_embeddings(s, vp).data, np.broadcast_to(vp[3], (4, 8)))


def test_bias_embeddings_triple_loop_oracle():
    r = np.random.default_rng(6)
    s, vp = r.random((3, 5)), r.normal(size=(5, 4))
    ref = np.zeros((3, 4))
    for c in range(3):
        for d in range(4):
            for l in range(5):
                ref[c, d] += s[c, l] * vp[l, d]
    assert np.max(np.abs(tci.bias_embeddings(s, vp).data - ref)) < 1e-12


def test_bias_embeddings_shape_error():
    with pytest.raises(ShapeError):
        tci.bias_embeddings(np.zeros((4, 5)), np.zeros((6, 8)))


def test_identity_h_leaves_text_unchanged():
    t = bank()
    b = np.random.default_rng(7).normal(size=(4, 8))
    assert np.array_equal(tci.debias(t, b, ApproximatorH.identity(8)).data, t.t.data)


def test_zero_h_gives_zero():
    h = ApproximatorH(Param(np.zeros((8, 16)), "w"), Param(np.zeros(8), "b"))
    out = tci.debias(bank(), np.ones((4, 8)), h).data
    assert np.array_equal(out, np.zeros((4, 8)))


def test_random_h_affine_oracle():
    r = np.random.default_rng(8)
    t, h = bank(seed=9), ApproximatorH.random(8, r)
    b = r.normal(size=(4, 8))
    out = tci.debias(t, b, h).data
    for c in range(4):
        ref = h.weight.data @ np.concatenate([t.t.data[c], b[c]]) + h.bias.data
        assert np.max(np.abs(out[c] - ref)) < 1e-12


def test_debias_shape_error():
    with pytest.raises(ShapeError):
        tci.debias(bank(), np.zeros((3, 8)), ApproximatorH.identity(8))
    with pytest.raises(ShapeError):
        tci.debias(bank(), np.zeros((4, 8)), ApproximatorH.identity(6))


def test_batched_intervention_matches_per_episode():
    r = np.random.default_rng(10)
    t, h = bank(), ApproximatorH.random(8, r)
    vp = r.normal(size=(3, 5, 8))
    whole = tci.textual_intervention(vp, t, h).data
    for i in range(3):
        assert np.array_equal(whole[i], tci.textual_intervention(vp[i], t, h).data)


def test_grad_check_tci():
    r = np.random.default_rng(11)
    t, h = bank(C=3, D=4, tau=0.5), ApproximatorH.random(4, r)
    vp = r.normal(size=(2, 5, 4))
    target = r.normal(size=(2, 3, 4))

    def loss():
        out = tci.textual_intervention(vp, t, h)
        diff = nm.add(out, Tensor(-target))
        return nm.mean(nm.mul(diff, diff))

    assert nm.grad_check(loss, [t.t, *h.params()]) < 1e-4
