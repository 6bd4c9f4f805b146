"""Run configuration: one JSON document with world/train/output/overrides sections."""
from __future__ import annotations

import json
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError, ParseError
from .harness.training import TrainConfig
from .synthworld import PRESETS, WorldSpec

SECTIONS = ("world", "train", "output", "overrides")

# command-specific knobs with their expected types; path-valued keys are
# checked for existence at parse time
OVERRIDE_TYPES: dict[str, Any] = {
    "count": int,
    "regime": str,
    "seeds": list,
    "sweep": str,
    "values": list,
    "checkpoint": str,
    "dataset": str,
}
PATH_KEYS = ("checkpoint", "dataset")


def _world_types() -> dict[str, Any]:
    hints = typing.get_type_hints(WorldSpec)
    out = {}
    for f in fields(WorldSpec):
        hint = hints[f.name]
        out[f.name] = list if typing.get_origin(hint) is tuple else hint
    return out


def _check_type(section: str, key: str, value, expected) -> None:
    if expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected is list:
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, expected)
    if not ok:
        raise ConfigError(f"{section}.{key}: expected {expected.__name__}, got {type(value).__name__}")


@dataclass
class RunConfig:
    world: dict = field(default_factory=lambda: {"preset": "strong_bias"})
    train: TrainConfig = field(default_factory=TrainConfig)
    output: str = "runs"
    overrides: dict = field(default_factory=dict)

    def world_spec(self) -> WorldSpec:
        """Preset (if named) with the remaining world keys layered on top."""
        entries = dict(self.world)
        preset = entries.pop("preset", None)
        if preset is None:
            return WorldSpec(**entries)
        return PRESETS[preset](**entries)

    def to_dict(self) -> dict:
        return {"world": dict(self.world), "train": self.train.to_dict(),
                "output": self.output, "overrides": dict(self.overrides)}


def serialize(config: RunConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"


def from_dict(doc: Any, base_dir: Path | None = None) -> RunConfig:
    """Validate a decoded document, apply defaults, and build a :class:`RunConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    for key in doc:
        if key not in SECTIONS:
            raise ConfigError(f"unknown key {key!r} at top level")
    default = RunConfig()

    world = doc.get("world", default.world)
    if not isinstance(world, dict):
        raise ConfigError("world: expected object")
    world_types = _world_types()
    for key, value in world.items():
        if key == "preset":
            if value not in PRESETS:
                raise ConfigError(f"world.preset: unknown preset {value!r}")
            continue
        if key not in world_types:
            raise ConfigError(f"unknown key {key!r} in world")
        _check_type("world", key, value, world_types[key])

    train = doc.get("train", {})
    if not isinstance(train, dict):
        raise ConfigError("train: expected object")
    train_types = TrainConfig.field_types()
    for key, value in train.items():
        if key not in train_types:
            raise ConfigError(f"unknown key {key!r} in train")
        _check_type("train", key, value, train_types[key])
    train_cfg = TrainConfig(**{k: (float(v) if train_types[k] is float else v) for k, v in train.items()})
    train_cfg.validate()

    output = doc.get("output", default.output)
    _check_type("config", "output", output, str)

    overrides = doc.get("overrides", {})
    if not isinstance(overrides, dict):
        raise ConfigError("overrides: expected object")
    for key, value in overrides.items():
        if key not in OVERRIDE_TYPES:
            raise ConfigError(f"unknown key {key!r} in overrides")
        _check_type("overrides", key, value, OVERRIDE_TYPES[key])
    overrides = dict(overrides)
    for key in PATH_KEYS:
        if key in overrides:
            p = Path(overrides[key])
            if not p.is_absolute() and base_dir is not None:
                p = base_dir / p
            if not p.exists():
                raise ConfigError(f"overrides.{key}: path {str(p)!r} does not exist")
            overrides[key] = str(p)

    config = RunConfig(world=dict(world), train=train_cfg, output=output, overrides=overrides)
    config.world_spec().validate()
    return config


def parse_config(path) -> RunConfig:
    """Read and validate ``path``.

    A missing file raises :class:`FileNotFoundError`; malformed JSON raises
    :class:`ParseError` with line and column.
    """
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return from_dict(doc, base_dir=path.parent)
