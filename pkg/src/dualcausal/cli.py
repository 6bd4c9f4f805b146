"""Command-line entry point: generate, train, eval, ablate, sweep, scm-verify.

Every command reads an optional JSON run config (``--config``) and writes its
artifacts under ``--out``:

    generate    dataset.json
    train       checkpoint.json, loss_curve.csv
    eval        metrics.csv, matching.csv, cooccurrence.csv[, coclassification.csv]
    ablate      ablation.csv, matching_summary.csv
    sweep       sweep.csv
    scm-verify  identities.csv (and one pass/fail line per identity on stdout)

If a command fails, the files it already wrote are removed and the exit status
is 1.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import scm
from .config import RunConfig, from_dict, parse_config
from .errors import DualCausalError
from .harness.ablation import data_splits, run_ablation, run_sweep, spurious_matching
from .harness.artifacts import load_checkpoint, matrix_grid, metrics_table, save_checkpoint
from .harness.evaluation import evaluate
from .harness.training import TrainConfig, train
from .model import VARIANTS, DualCausalModel
from .synthworld import (REGIMES, WorldSpec, build_world, export_dataset, import_dataset,
                         sample_dataset)

log = logging.getLogger("dualcausal")

COMMANDS = ("generate", "train", "eval", "ablate", "sweep", "scm-verify")


class Artifacts:
    """Tracks files written by one command so a failure can roll them back."""

    def __init__(self, root: Path):
        self.root = root
        self.written: list[Path] = []
        self._made_root = not root.exists()

    def path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.root / name
        self.written.append(p)
        return p

    def write(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text)
        return p

    def rollback(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)
        if self._made_root and self.root.exists() and not any(self.root.iterdir()):
            self.root.rmdir()


def _model_from_checkpoint(path) -> tuple[DualCausalModel, TrainConfig, WorldSpec]:
    state, meta, _ = load_checkpoint(path)
    config = TrainConfig(**meta["train"])
    spec = WorldSpec.from_dict(meta["world"])
    world = build_world(spec)
    model = DualCausalModel.init(world, np.random.default_rng(0), variant=config.variant,
                                 mode=config.mode, layers=config.layers, heads=config.heads,
                                 tau_text=config.tau_text, tau_vis=config.tau_vis)
    model.load_state_dict(state)
    return model, config, spec


def _labels(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


def cmd_generate(cfg: RunConfig, out: Artifacts) -> None:
    spec = cfg.world_spec()
    world = build_world(spec)
    count = cfg.overrides.get("count", cfg.train.train_size)
    regime = cfg.overrides.get("regime", "observational")
    if regime not in REGIMES:
        raise DualCausalError(f"regime must be one of {REGIMES}")
    episodes = sample_dataset(world, count, [cfg.train.seed, 1 if regime == "observational" else 9], regime)
    export_dataset(episodes, out.path("dataset.json"), spec)


def cmd_train(cfg: RunConfig, out: Artifacts) -> None:
    spec = cfg.world_spec()
    world = build_world(spec)
    episodes = import_dataset(cfg.overrides["dataset"]) if "dataset" in cfg.overrides else None
    result = train(world, cfg.train, episodes)
    save_checkpoint(out.path("checkpoint.json"), result.model.state_dict(),
                    {"train": cfg.train.to_dict(), "world": spec.to_dict()}, result.loss_curve)
    out.write("loss_curve.csv", "epoch,loss\n" + "".join(
        f"{i},{v:.17g}\n" for i, v in enumerate(result.loss_curve)))


def cmd_eval(cfg: RunConfig, out: Artifacts) -> None:
    ckpt = cfg.overrides.get("checkpoint", str(out.root / "checkpoint.json"))
    model, tcfg, spec = _model_from_checkpoint(ckpt)
    if "dataset" in cfg.overrides:
        episodes = import_dataset(cfg.overrides["dataset"])
    else:
        _, episodes = data_splits(build_world(spec), tcfg, tcfg.seed)
    report = evaluate(model, episodes, tcfg.mode, cfg.train.threshold)
    out.write("metrics.csv", metrics_table([{"variant": tcfg.variant, "seed": tcfg.seed, **report.row()}]))
    A, C = report.matching.shape
    out.write("matching.csv", matrix_grid(report.matching, _labels("a", A), _labels("c", C)))
    out.write("cooccurrence.csv", matrix_grid(report.cooccurrence, _labels("a", A), _labels("a", A)))
    if report.coclassification is not None:
        out.write("coclassification.csv",
                  matrix_grid(report.coclassification, _labels("a", A), _labels("a", A)))


def cmd_ablate(cfg: RunConfig, out: Artifacts) -> None:
    spec = cfg.world_spec()
    world = build_world(spec)
    seeds = cfg.overrides.get("seeds", [cfg.train.seed])
    result = run_ablation(world, cfg.train, seeds)
    out.write("ablation.csv", metrics_table(result.rows()))
    lines = ["variant,seed,spurious_matching\n"]
    for v in result.reports:
        for s, r in zip(result.seeds, result.reports[v]):
            lines.append(f"{v},{s},{spurious_matching(r, spec.confounder_actions):.17g}\n")
    out.write("matching_summary.csv", "".join(lines))


def cmd_sweep(cfg: RunConfig, out: Artifacts) -> None:
    """Vary the attention depth (``layers``) or the clip length (``frames``)."""
    knob = cfg.overrides.get("sweep", "layers")
    default = [0, 1, 2, 4, 6] if knob == "layers" else [8, 12, 16, 24]
    rows = run_sweep(cfg.world_spec(), cfg.train, knob, cfg.overrides.get("values", default))
    text = f"{knob},variant,seed,acc1,acc5,map\n" + "".join(
        f"{v},{cfg.train.variant},{cfg.train.seed},{r['acc1']:.17g},{r['acc5']:.17g},{r['map']:.17g}\n"
        for v, r in rows)
    out.write("sweep.csv", text)


def cmd_scm_verify(cfg: RunConfig, out: Artifacts) -> bool:
    lines = ["fixture,identity,passed,max_gap\n"]
    ok = True
    for name, model in scm.bundled_fixtures().items():
        for identity, passed, gap in scm.verify_identities(model):
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'} {name}: {identity} (max gap {gap:.3g})")
            lines.append(f"{name},{identity},{int(passed)},{gap:.17g}\n")
    out.write("identities.csv", "".join(lines))
    return ok


HANDLERS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval,
            "ablate": cmd_ablate, "sweep": cmd_sweep, "scm-verify": cmd_scm_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualcausal", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON run config")
    parser.add_argument("--seed", type=int, help="overrides train.seed")
    parser.add_argument("--out", type=Path, help="output directory (overrides the config)")
    parser.add_argument("--variant", choices=VARIANTS, help="overrides train.variant")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = parse_config(args.config) if args.config else from_dict({})
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise DualCausalError("--seed must be an unsigned 64-bit integer")
        cfg.train = replace(cfg.train, seed=args.seed)
    if args.variant is not None:
        cfg.train = replace(cfg.train, variant=args.variant)
    if args.out is not None:
        cfg.output = str(args.out)
    return cfg


def dispatch(command: str, cfg: RunConfig) -> int:
    """Run one command; returns the exit status."""
    out = Artifacts(Path(cfg.output))
    try:
        ok = HANDLERS[command](cfg, out)
    except (DualCausalError, OSError, ValueError, KeyError) as exc:
        out.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1 if ok is False else 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (DualCausalError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return dispatch(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
