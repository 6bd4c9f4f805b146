import json

import pytest

from dualcausal import cli
from dualcausal.config import RunConfig, from_dict, parse_config, serialize
from dualcausal.errors import ConfigError, ParseError
from dualcausal.harness.artifacts import load_checkpoint, read_matrix_grid, read_metrics_table
from dualcausal.synthworld import import_dataset

TINY = {"epochs": 1, "train_size": 8, "test_size": 8, "layers": 1, "batch_size": 4}


def write(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


# parse_config ----------------------------------------------------------------------

def test_default_round_trip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(serialize(RunConfig()))
    assert parse_config(p) == RunConfig()


def test_unknown_key_named(tmp_path):
    with pytest.raises(ConfigError, match="epochz"):
        parse_config(write(tmp_path, {"train": {"epochz": 3}}))
    with pytest.raises(ConfigError, match="colour"):
        parse_config(write(tmp_path, {"colour": 1}))
    with pytest.raises(ConfigError, match="betta"):
        parse_config(write(tmp_path, {"world": {"betta": 1}}))


def test_type_mismatch_names_field_and_type(tmp_path):
    with pytest.raises(ConfigError, match=r"train\.epochs: expected int"):
        parse_config(write(tmp_path, {"train": {"epochs": "ten"}}))
    with pytest.raises(ConfigError, match=r"world\.bias_strength: expected float"):
        parse_config(write(tmp_path, {"world": {"bias_strength": "high"}}))


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_config(tmp_path / "nope.json")


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "train": {,}\n}')
    with pytest.raises(ParseError, match="line 2"):
        parse_config(p)


def test_referenced_paths_checked_at_parse_time(tmp_path):
    with pytest.raises(ConfigError, match="checkpoint"):
        parse_config(write(tmp_path, {"overrides": {"checkpoint": "missing.json"}}))


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        from_dict({"train": {"learning_rate": -0.1}})
    with pytest.raises(ConfigError):
        from_dict({"world": {"preset": "nonexistent"}})


def test_world_preset_overrides():
    cfg = from_dict({"world": {"preset": "strong_bias", "noise_sigma": 0.2}})
    spec = cfg.world_spec()
    assert spec.noise_sigma == 0.2 and spec.bias_strength > 0


# dispatch --------------------------------------------------------------------------

def run(tmp_path, command, doc=None, *flags):
    args = [command, "--out", str(tmp_path / "out"), *flags]
    if doc is not None:
        args += ["--config", str(write(tmp_path, doc))]
    return cli.main(args)


def test_scm_verify_passes(tmp_path, capsys):
    assert run(tmp_path, "scm-verify") == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 10


def test_generate_train_eval_round_trip(tmp_path):
    doc = {"train": TINY, "overrides": {"count": 6}}
    assert run(tmp_path, "generate", doc) == 0
    eps = import_dataset(tmp_path / "out" / "dataset.json")
    assert len(eps) == 6
    assert run(tmp_path, "train", {"train": TINY}, "--seed", "5", "--variant", "tci_only") == 0
    state, meta, curve = load_checkpoint(tmp_path / "out" / "checkpoint.json")
    assert meta["train"]["seed"] == 5 and meta["train"]["variant"] == "tci_only"
    assert len(curve) == 1
    assert run(tmp_path, "eval", {"train": TINY}) == 0
    rows = read_metrics_table(tmp_path / "out" / "metrics.csv")
    assert rows[0]["variant"] == "tci_only" and rows[0]["seed"] == 5
    m, rlab, clab = read_matrix_grid(tmp_path / "out" / "matching.csv")
    assert m.shape == (12, 4)


def test_train_on_generated_dataset(tmp_path):
    assert run(tmp_path, "generate", {"train": TINY, "overrides": {"count": 4}}) == 0
    doc = {"train": TINY, "overrides": {"dataset": str(tmp_path / "out" / "dataset.json")}}
    assert run(tmp_path, "train", doc) == 0


def test_zero_learning_rate_checkpoint_equals_init(tmp_path):
    from dualcausal.harness.training import TrainConfig, train
    from dualcausal.synthworld import build_world, strong_bias
    doc = {"train": dict(TINY, learning_rate=0.0)}
    assert run(tmp_path, "train", doc) == 0
    state, _, _ = load_checkpoint(tmp_path / "out" / "checkpoint.json")
    init = train(build_world(strong_bias()), TrainConfig(**dict(TINY, learning_rate=0.0))).initial_state
    assert state.keys() == init.keys()
    for k in state:
        assert (state[k] == init[k]).all()


def test_ablate_emits_four_rows(tmp_path):
    assert run(tmp_path, "ablate", {"train": TINY}, "--seed", "7") == 0
    rows = read_metrics_table(tmp_path / "out" / "ablation.csv")
    assert [r["variant"] for r in rows] == ["baseline", "tci_only", "vci_only", "full"]
    assert all(r["seed"] == 7 for r in rows)
    header = (tmp_path / "out" / "ablation.csv").read_text().splitlines()[0]
    assert header == "variant,seed,acc1,acc5,map"


def test_sweep_writes_table(tmp_path):
    doc = {"train": TINY, "overrides": {"sweep": "frames", "values": [8, 12]}}
    assert run(tmp_path, "sweep", doc) == 0
    lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "frames,variant,seed,acc1,acc5,map" and len(lines) == 3


def test_failure_exits_nonzero_and_removes_partial_artifacts(tmp_path):
    doc = {"train": TINY, "overrides": {"sweep": "frames", "values": [8, 2]}}  # 2 frames cannot hold a class
    assert run(tmp_path, "sweep", doc) == 1
    assert not (tmp_path / "out").exists()


def test_divergent_training_rolls_back(tmp_path):
    doc = {"train": dict(TINY, learning_rate=1e200, epochs=3)}
    assert run(tmp_path, "train", doc) == 1
    assert not (tmp_path / "out" / "checkpoint.json").exists()


def test_bad_config_exit_status(tmp_path, capsys):
    assert run(tmp_path, "train", {"train": {"epochz": 1}}) == 1
    assert "epochz" in capsys.readouterr().err


def test_unknown_command_rejected():
    with pytest.raises(SystemExit):
        cli.main(["bake"])
