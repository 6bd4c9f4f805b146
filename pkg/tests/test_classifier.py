import numpy as np
import pytest

from dualcausal import classifier as clf
from dualcausal import numerics as nm
from dualcausal.classifier import HeadParams
from dualcausal.errors import InvalidArgumentError, ShapeError
from dualcausal.numerics import Param


def test_interact_identities():
    t = np.random.default_rng(0).normal(size=(4, 8))
    assert np.array_equal(clf.interact(t, np.ones((4, 8))).data, t)
    assert np.array_equal(clf.interact(t, np.zeros((4, 8))).data, np.zeros((4, 8)))
    assert np.array_equal(clf.interact(np.zeros((4, 8)), t).data, np.zeros((4, 8)))


def test_interact_elementwise_oracle():
    r = np.random.default_rng(1)
    a, b = r.normal(size=(3, 5)), r.normal(size=(3, 5))
    out = clf.interact(a, b).data
    for c in range(3):
        for d in range(5):
            assert abs(out[c, d] - a[c, d] * b[c, d]) < 1e-12


def test_interact_shape_error():
    with pytest.raises(ShapeError):
        clf.interact(np.zeros((3, 5)), np.zeros((4, 5)))


def test_zero_head_uniform():
    head = HeadParams.init(4, 8, "single", scale=0.0)
    p = clf.predict(np.random.default_rng(2).normal(size=(4, 8)), head).data
    assert np.array_equal(p, np.full(4, 0.25))


def test_bias_shift_leaves_probabilities():
    r = np.random.default_rng(3)
    f = r.normal(size=(4, 8))
    head = HeadParams(Param(r.normal(size=(4, 8)), "w"), Param(r.normal(size=4), "b"))
    shifted = HeadParams(Param(head.w.data.copy(), "w"), Param(head.b.data + 5.0, "b"))
    assert np.max(np.abs(clf.predict(f, head).data - clf.predict(f, shifted).data)) < 1e-12


def test_multi_label_zero_logits_half():
    head = HeadParams.init(5, 3, "multi", scale=0.0)
    assert np.array_equal(clf.predict(np.ones((5, 3)), head).data, np.full(5, 0.5))


def test_predict_oracle_both_modes():
    r = np.random.default_rng(4)
    f, w, b = r.normal(size=(4, 6)), r.normal(size=(4, 6)), r.normal(size=4)
    z = np.array([sum(w[c, d] * f[c, d] for d in range(6)) + b[c] for c in range(4)])
    e = np.exp(z - z.max())
    single = clf.predict(f, HeadParams(Param(w, "w"), Param(b, "b"), "single")).data
    multi = clf.predict(f, HeadParams(Param(w, "w"), Param(b, "b"), "multi")).data
    assert np.max(np.abs(single - e / e.sum())) < 1e-12
    assert np.max(np.abs(multi - 1 / (1 + np.exp(-z)))) < 1e-12


def test_single_label_outputs_sum_to_one_on_1000_inputs():
    r = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        head = HeadParams(Param(r.normal(0, 3, (4, 8)), "w"), Param(r.normal(size=4), "b"))
        p = clf.predict(r.normal(size=(4, 8)), head).data
        worst = max(worst, abs(p.sum() - 1))
    assert worst < 1e-9


def test_multi_label_outputs_in_unit_interval():
    r = np.random.default_rng(6)
    head = HeadParams(Param(r.normal(0, 30, (4, 8)), "w"), Param(r.normal(size=4), "b"), "multi")
    p = clf.predict(r.normal(size=(50, 4, 8)), head).data
    assert np.all((p >= 0) & (p <= 1))


def test_head_validation():
    with pytest.raises(InvalidArgumentError):
        HeadParams.init(3, 4, "ranking")
    with pytest.raises(ShapeError):
        HeadParams(Param(np.zeros((3, 4)), "w"), Param(np.zeros(2), "b"))
    with pytest.raises(ShapeError):
        clf.logits(np.zeros((3, 5)), HeadParams.init(3, 4))


def test_grad_check_head():
    r = np.random.default_rng(7)
    t, v = Param(r.normal(size=(4, 6)), "t"), Param(r.normal(size=(4, 6)), "v")
    head = HeadParams(Param(r.normal(size=(4, 6)), "w"), Param(r.normal(size=4), "b"))
    y = np.array([2])

    def loss():
        z = clf.logits(clf.interact(t, v), head)
        return nm.cross_entropy(nm.reshape(z, (1, 4)), y)

    assert nm.grad_check(loss, [t, v, *head.params()]) < 1e-4
