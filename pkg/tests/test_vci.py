import numpy as np
import pytest

from dualcausal import numerics as nm
from dualcausal import vci
from dualcausal.errors import InvalidArgumentError, ShapeError
from dualcausal.numerics import Param, Tensor
from dualcausal.vci import ApproximatorG, STAStack


def stack(layers, L=6, D=8, seed=0):
    return STAStack.init(L, D, layers, np.random.default_rng(seed), heads=2)


def test_empty_stack_is_identity():
    v = np.random.default_rng(1).normal(size=(6, 8))
    assert np.array_equal(vci.encode_sta(v, stack(0)).data, v)


def test_zero_projection_stack_is_identity():
    s = stack(3)
    for blk in s.blocks:
        for p in blk.params():
            p.data = np.zeros_like(p.data)
    v = np.random.default_rng(2).normal(size=(6, 8))
    assert np.array_equal(vci.encode_sta(v, s).data, v)


def test_two_layer_stack_matches_blockwise_composition():
    s = stack(2, seed=3)
    v = np.random.default_rng(4).normal(size=(6, 8))
    x = v
    for blk in s.blocks:
        x = nm.mhsa_block(Tensor(x), blk, 2, Tensor(s.pos.data)).data
    assert np.max(np.abs(vci.encode_sta(v, s).data - x)) < 1e-12


def test_encode_shape_error():
    with pytest.raises(ShapeError):
        vci.encode_sta(np.zeros((5, 8)), stack(1))


def test_stack_params_include_positions_only_with_blocks():
    assert stack(0).params() == []
    assert any(p.name == "sta.pos" for p in stack(1).params())


def test_order_sensitivity():
    s = stack(2, seed=5)
    r = np.random.default_rng(6)
    v, t = r.normal(size=(6, 8)), r.normal(size=(4, 8))
    perm = r.permutation(6)

    def pooled(x):
        vh = vci.encode_sta(x, s)
        return vci.emphasized(vci.fine_scores(vh, t, 0.07), vh).data.mean(0)

    assert np.max(np.abs(pooled(v) - pooled(v[perm]))) > 1e-6


def test_zero_frames_give_uniform_fibers():
    fs = vci.fine_scores(np.zeros((5, 8)), np.ones((4, 8)), 0.07).data
    assert fs.shape == (4, 5, 8)
    assert np.array_equal(fs, np.full((4, 5, 8), 0.2))


def test_single_frame_fibers_are_one():
    r = np.random.default_rng(7)
    assert np.all(vci.fine_scores(r.normal(size=(1, 8)), r.normal(size=(3, 8)), 0.07).data == 1.0)


def test_fine_scores_rejects_bad_tau():
    with pytest.raises(InvalidArgumentError):
        vci.fine_scores(np.zeros((2, 3)), np.zeros((2, 3)), 0.0)


def test_fine_scores_scalar_softmax_oracle():
    r = np.random.default_rng(8)
    vh, t = r.normal(size=(5, 4)), r.normal(size=(3, 4))
    fs = vci.fine_scores(vh, t, 0.3).data
    for c in range(3):
        for d in range(4):
            z = np.array([vh[l, d] * t[c, d] / 0.3 for l in range(5)])
            e = np.exp(z - z.max())
            assert np.max(np.abs(fs[c, :, d] - e / e.sum())) < 1e-12


def test_fibers_sum_to_one_on_1000_inputs():
    r = np.random.default_rng(9)
    worst = 0.0
    for _ in range(1000):
        L = int(r.integers(1, 17))
        fs = vci.fine_scores(r.normal(0, 3, (L, 8)), r.normal(size=(4, 8)), 0.07).data
        worst = max(worst, np.max(np.abs(fs.sum(-2) - 1)))
    assert worst < 1e-9


def test_emphasized_uniform_and_one_hot():
    vh = np.random.default_rng(10).normal(size=(5, 8))
    assert np.allclose(vci.emphasized(np.full((3, 5, 8), 0.2), vh).data, vh.mean(0), atol=1e-15)
    s = np.zeros((3, 5, 8))
    s[:, 2, :] = 1.0
    assert np.array_equal(vci.emphasized(s, vh).data, np.broadcast_to(vh[2], (3, 8)))


def test_emphasized_triple_loop_oracle():
    r = np.random.default_rng(11)
    s, vh = r.random((3, 5, 4)), r.normal(size=(5, 4))
    ref = np.zeros((3, 4))
    for c in range(3):
        for d in range(4):
            for l in range(5):
                ref[c, d] += s[c, l, d] * vh[l, d]
    assert np.max(np.abs(vci.emphasized(s, vh).data - ref)) < 1e-12


def test_emphasized_shape_error():
    with pytest.raises(ShapeError):
        vci.emphasized(np.zeros((3, 5, 8)), np.zeros((4, 8)))


def test_identity_g_returns_emphasized():
    r = np.random.default_rng(12)
    tp, vh = r.normal(size=(4, 8)), r.normal(size=(4, 8))
    assert np.array_equal(vci.deconfound(tp, vh, ApproximatorG.identity(8)).data, vh)


def test_zero_g_gives_zero():
    g = ApproximatorG(Param(np.zeros((8, 16)), "w"), Param(np.zeros(8), "b"))
    assert np.array_equal(vci.deconfound(np.ones((4, 8)), np.ones((4, 8)), g).data, np.zeros((4, 8)))


def test_random_g_affine_oracle():
    r = np.random.default_rng(13)
    g = ApproximatorG.random(8, r)
    tp, vh = r.normal(size=(4, 8)), r.normal(size=(4, 8))
    out = vci.deconfound(tp, vh, g).data
    for c in range(4):
        ref = g.weight.data @ np.concatenate([tp[c], vh[c]]) + g.bias.data
        assert np.max(np.abs(out[c] - ref)) < 1e-12


def test_deconfound_shape_error():
    with pytest.raises(ShapeError):
        vci.deconfound(np.zeros((4, 8)), np.zeros((3, 8)), ApproximatorG.identity(8))


def test_grad_check_vci_path():
    r = np.random.default_rng(14)
    s = STAStack.init(4, 8, 2, r, heads=2, tau_vis=0.5)
    g = ApproximatorG.random(8, r)
    t = Param(r.normal(size=(3, 8)), "t")
    v = r.normal(size=(2, 4, 8))

    def loss():
        vh = vci.encode_sta(v, s)
        vp = vci.deconfound(nm.broadcast_to(t, (2, 3, 8)), vci.emphasized(vci.fine_scores(vh, t, 0.5), vh), g)
        return nm.mean(nm.mul(vp, vp))

    assert nm.grad_check(loss, [t, *s.params(), *g.params()]) < 1e-4
