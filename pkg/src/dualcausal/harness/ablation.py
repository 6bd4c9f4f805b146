"""Four-variant ablation with shared data splits and seeds."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..model import VARIANTS
from ..synthworld import World, WorldSpec, build_world, sample_dataset, split_digest
from .evaluation import MetricsReport, evaluate
from .training import TrainConfig, train

log = logging.getLogger(__name__)


def data_splits(world: World, config: TrainConfig, seed: int):
    """Observational training split and interventional test split for one seed."""
    train_set = sample_dataset(world, config.train_size, [seed, 1], "observational")
    test_set = sample_dataset(world, config.test_size, [seed, 9], "interventional")
    return train_set, test_set


@dataclass
class AblationResult:
    reports: dict[str, list[MetricsReport]]
    seeds: list[int]
    digests: dict[str, list[str]] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [{"variant": v, "seed": s, **r.row()}
                for v in self.reports for s, r in zip(self.seeds, self.reports[v])]

    def mean(self, variant: str, metric: str) -> float:
        return float(np.mean([r.row()[metric] for r in self.reports[variant]]))


def spurious_matching(report: MetricsReport, confounder_actions: Sequence[tuple[int, int]]) -> float:
    """Mean matching probability from confounder-action frames to their spurious class."""
    vals = [report.matching[a, c] for a, c in confounder_actions if a not in report.absent_atomic]
    return float(np.mean(vals)) if vals else float("nan")


def run_ablation(world: World, base_config: TrainConfig, seeds: Sequence[int] = (0,),
                 variants: Sequence[str] = VARIANTS) -> AblationResult:
    """Train and evaluate every variant on identical splits for every seed."""
    reports: dict[str, list[MetricsReport]] = {v: [] for v in variants}
    digests: dict[str, list[str]] = {v: [] for v in variants}
    for seed in seeds:
        train_set, test_set = data_splits(world, base_config, seed)
        for variant in variants:
            config = replace(base_config, variant=variant, seed=seed)
            result = train(world, config, train_set)
            digests[variant].append(split_digest(train_set, test_set))
            reports[variant].append(evaluate(result.model, test_set, config.mode, config.threshold,
                                             result.loss_curve))
            log.info("seed %d %s acc1=%.4f map=%.4f", seed, variant,
                     reports[variant][-1].acc_at_1, reports[variant][-1].map)
    return AblationResult(reports, list(seeds), digests)


SWEEP_KNOBS = ("layers", "frames")


def run_sweep(spec: WorldSpec, config: TrainConfig, knob: str, values: Sequence[int]) -> list[tuple[int, dict]]:
    """Train and evaluate one variant per value of the attention depth or clip length."""
    if knob not in SWEEP_KNOBS:
        raise ConfigError(f"sweep knob must be one of {SWEEP_KNOBS}, got {knob!r}")
    rows = []
    for value in values:
        tcfg, world_spec = config, spec
        if knob == "layers":
            tcfg = replace(config, layers=int(value))
        else:
            world_spec = replace(spec, frames_per_episode=int(value))
        world_spec.validate()
        world = build_world(world_spec)
        train_set, test_set = data_splits(world, tcfg, tcfg.seed)
        result = train(world, tcfg, train_set)
        report = evaluate(result.model, test_set, tcfg.mode, tcfg.threshold, result.loss_curve)
        log.info("%s=%s acc1=%.4f map=%.4f", knob, value, report.acc_at_1, report.map)
        rows.append((int(value), report.row()))
    return rows
