import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcausal import synthworld as sw
from dualcausal.errors import GenerationError, ParseError, SpecValidationError


def desk(**kw):
    return sw.build_world(sw.breakfast_analog(**kw))


def test_build_world_deterministic():
    a, b = desk(seed=3), desk(seed=3)
    for name in ("atomic_prototypes", "class_text_prototypes", "confounder_offsets", "bias_directions"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_minimal_world_unit_prototype():
    w = sw.build_world(sw.WorldSpec(num_classes=1, num_atomic=1, frames_per_episode=1, feature_dim=3,
                                    cooccur_rules=((0,),)))
    assert w.atomic_prototypes.shape == (1, 3)
    assert abs(np.linalg.norm(w.atomic_prototypes[0]) - 1.0) < 1e-12


def test_prototypes_unit_norm():
    w = desk()
    for arr in (w.atomic_prototypes, w.class_text_prototypes, w.confounder_offsets, w.bias_directions):
        assert np.allclose(np.linalg.norm(arr, axis=1), 1.0, atol=1e-12)


def test_exclusive_action_in_two_classes_rejected():
    spec = sw.breakfast_analog(exclusive_owner=(0, -1, 0, 0, 1, 1, 2, -1, 2, 3, 3, -1))
    with pytest.raises(SpecValidationError, match="exclusive action 0"):
        sw.build_world(spec)


def test_order_rule_must_reference_class_actions():
    spec = sw.breakfast_analog(order_rules=((2, 0, 6),))
    with pytest.raises(SpecValidationError, match="order rule"):
        spec.validate()


def test_cyclic_order_rules_raise_generation_error():
    spec = sw.breakfast_analog(order_rules=((0, 0, 1), (0, 1, 0)))
    w = sw.build_world(spec)
    with pytest.raises(GenerationError):
        sw.sample_dataset(w, 50, 0)  # class 0 is drawn well within 50 episodes


def test_no_bias_no_confounder_no_noise_channels_equal():
    w = desk(noise_sigma=0.0)
    for e in sw.sample_dataset(w, 20, 1):
        assert np.array_equal(e.v_p, e.v)


def test_order_rules_hold_in_every_episode():
    w = desk(bias_strength=1.0, confounder_strength=1.0)
    eps = sw.sample_dataset(w, 1000, 5)
    for c, before, after in w.spec.order_rules:
        for e in (e for e in eps if e.y == c):
            first = {a: int(np.argmax(e.frame_atomic == a)) for a in (before, after)}
            assert first[before] < first[after]


def test_exclusive_actions_never_leak():
    w = desk()
    eps = sw.sample_dataset(w, 1000, 6, "interventional")
    for e in eps:
        for a, owner in enumerate(w.spec.exclusive_owner):
            if owner >= 0 and e.y != owner:
                assert e.atomic_labels[a] == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 63 - 1), st.sampled_from(sw.REGIMES))
def test_label_consistency(seed, regime):
    w = desk(bias_strength=1.0, confounder_strength=1.0)
    e = sw.sample_episode(w, np.random.default_rng(seed), regime)
    present = np.zeros(w.spec.num_atomic)
    present[np.unique(e.frame_atomic)] = 1
    assert np.array_equal(e.atomic_labels, present)
    assert set(w.spec.cooccur_rules[e.y]) <= set(np.flatnonzero(present))
    assert 0 <= e.confounder_id < w.spec.num_confounders


def test_determinism_of_streams():
    w = desk(bias_strength=2.0)
    assert sw.sample_dataset(w, 30, 9) == sw.sample_dataset(w, 30, 9)
    assert sw.sample_dataset(w, 30, 9) != sw.sample_dataset(w, 30, 10)


def test_worker_stream_uses_xor():
    a = sw.worker_stream(12, 5).integers(0, 2 ** 32, 4)
    b = np.random.default_rng(12 ^ 5).integers(0, 2 ** 32, 4)
    assert np.array_equal(a, b)


def test_bias_separability():
    # large beta, no confounder: nearest text prototype on mean v_p is fooled
    # by confounder-action frames more often than on mean v
    w = desk(bias_strength=1.5, confounder_strength=0.0, noise_sigma=0.3)
    eps = [e for e in sw.sample_dataset(w, 2000, 11, "interventional") if e.atomic_labels[11]]
    assert len(eps) >= 500
    protos = w.class_text_prototypes

    def error_rate(channel):
        feats = np.stack([getattr(e, channel).mean(axis=0) for e in eps])
        pred = np.argmax(feats @ protos.T, axis=1)
        return np.mean(pred != np.array([e.y for e in eps]))

    assert error_rate("v_p") > error_rate("v")


def test_observational_regime_carries_spurious_association():
    w = desk()
    obs = sw.sample_dataset(w, 800, 2, "observational")
    inter = sw.sample_dataset(w, 800, 2, "interventional")

    def rate(eps):
        with_conf = [e for e in eps if e.atomic_labels[11]]
        return np.mean([e.y == 0 for e in with_conf])

    assert rate(obs) > 0.5 > rate(inter)


# co-occurrence -----------------------------------------------------------------------

def test_cooccurrence_empty_is_zero():
    assert np.array_equal(sw.cooccurrence_matrix([], 5), np.zeros((5, 5)))


def test_cooccurrence_single_episode():
    e = sw.sample_dataset(desk(), 1, 0)[0]
    labels = np.zeros(12)
    labels[[2, 7]] = 1
    e = sw.Episode(e.v_p, e.v, e.y, labels, e.confounder_id, e.frame_atomic)
    m = sw.cooccurrence_matrix([e], 12)
    for i in (2, 7):
        for j in (2, 7):
            assert m[i, j] == 1.0
    assert m.sum() == 4.0


def test_cooccurrence_exclusive_pairs():
    w = desk()
    m = sw.cooccurrence_matrix(sw.sample_dataset(w, 600, 4), 12)
    owners = w.spec.exclusive_owner
    excl = [a for a in range(12) if owners[a] >= 0]
    within = [m[i, j] for i in excl for j in excl if i != j and owners[i] == owners[j]]
    across = [m[i, j] for i in excl for j in excl if owners[i] != owners[j]]
    assert min(within) > max(across)


# dataset files -------------------------------------------------------------------------

def test_export_import_round_trip(tmp_path):
    w = desk(bias_strength=1.0, confounder_strength=1.0)
    eps = sw.sample_dataset(w, 10, 3)
    sw.export_dataset(eps, tmp_path / "d.json", w.spec)
    assert sw.import_dataset(tmp_path / "d.json") == eps
    assert sw.WorldSpec.from_dict(sw.read_header(tmp_path / "d.json")["spec"]) == w.spec


def test_import_truncated_file(tmp_path):
    eps = sw.sample_dataset(desk(), 3, 3)
    sw.export_dataset(eps, tmp_path / "d.json")
    text = (tmp_path / "d.json").read_text()
    (tmp_path / "t.json").write_text(text[: len(text) // 2])
    with pytest.raises(ParseError, match="line"):
        sw.import_dataset(tmp_path / "t.json")


def test_import_shape_mismatch_names_field(tmp_path):
    eps = sw.sample_dataset(desk(), 2, 3)
    sw.export_dataset(eps, tmp_path / "d.json")
    doc = json.loads((tmp_path / "d.json").read_text())
    doc["header"]["dim"] = 31
    (tmp_path / "d.json").write_text(json.dumps(doc))
    with pytest.raises(ParseError, match="v_p"):
        sw.import_dataset(tmp_path / "d.json")


def test_import_missing_file(tmp_path):
    with pytest.raises(OSError):
        sw.import_dataset(tmp_path / "absent.json")


def test_split_digest_tracks_content():
    w = desk()
    a, b = sw.sample_dataset(w, 5, 0), sw.sample_dataset(w, 5, 1)
    assert sw.split_digest(a, b) == sw.split_digest(list(a), list(b))
    assert sw.split_digest(a, b) != sw.split_digest(b, a)
