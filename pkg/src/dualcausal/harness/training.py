"""Mini-batch Adam training of the recognizer on synthetic episodes."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .. import numerics as nm
from ..classifier import MODES
from ..errors import ConfigError, NumericDomainError, TrainingDivergedError
from ..model import VARIANTS, DualCausalModel, stack_inputs
from ..numerics import Param
from ..synthworld import Episode, World, sample_dataset

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 16
    learning_rate: float = 1e-3
    schedule: str = "cosine"
    seed: int = 0
    variant: str = "full"
    layers: int = 6
    heads: int = 4
    tau_text: float = 0.07
    tau_vis: float = 0.07
    mode: str = "single"
    train_size: int = 256
    test_size: int = 256
    threshold: float = 0.5

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.schedule not in ("constant", "cosine"):
            raise ConfigError("schedule must be 'constant' or 'cosine'")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.layers < 0 or self.heads < 1:
            raise ConfigError("layers must be >= 0 and heads >= 1")
        if not (self.tau_text > 0 and self.tau_vis > 0):
            raise ConfigError("temperatures must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: type(f.default) for f in fields(cls)}


@dataclass
class Adam:
    params: list[Param]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def learning_rate(config: TrainConfig, step: int, total: int) -> float:
    if config.schedule == "constant" or total <= 1:
        return config.learning_rate
    return config.learning_rate * 0.5 * (1.0 + math.cos(math.pi * step / total))


def loss_on(model: DualCausalModel, episodes: Sequence[Episode]):
    """Mean cross-entropy (single-label) or mean logistic loss (multi-label).

    Also returns the per-episode loss values.
    """
    vp, v = stack_inputs(episodes)
    z = model.logits(vp, v)
    if model.head.mode == "single":
        y = np.array([e.y for e in episodes])
        loss = nm.cross_entropy(z, y)
        zs = z.data - z.data.max(axis=-1, keepdims=True)
        per = np.log(np.exp(zs).sum(axis=-1)) - zs[np.arange(len(y)), y]
    else:
        t = np.stack([e.atomic_labels for e in episodes])
        loss = nm.binary_cross_entropy_with_logits(z, t)
        per = (np.maximum(z.data, 0) - z.data * t + np.log1p(np.exp(-np.abs(z.data)))).mean(axis=-1)
    return loss, per


@dataclass
class TrainResult:
    model: DualCausalModel
    loss_curve: list[float]
    config: TrainConfig
    initial_state: dict[str, np.ndarray]


def train(world: World, config: TrainConfig, episodes: Sequence[Episode] | None = None) -> TrainResult:
    """Fit a fresh model; every random draw derives from ``config.seed``.

    ``loss_curve`` holds the mean per-episode training loss of every epoch. When
    ``episodes`` is omitted, ``config.train_size`` observational episodes are
    drawn from ``world``.
    """
    config.validate()
    if episodes is None:
        episodes = sample_dataset(world, config.train_size, [config.seed, 1])
    if not episodes:
        raise ConfigError("training set is empty")
    init_rng = np.random.default_rng([config.seed, 2])
    order_rng = np.random.default_rng([config.seed, 3])
    model = DualCausalModel.init(world, init_rng, variant=config.variant, mode=config.mode,
                                 layers=config.layers, heads=config.heads,
                                 tau_text=config.tau_text, tau_vis=config.tau_vis)
    initial = model.state_dict()
    params = model.params()
    opt = Adam(params, lr=config.learning_rate)
    n = len(episodes)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total = config.epochs * steps_per_epoch
    step = 0
    curve = []
    for epoch in range(config.epochs):
        perm = order_rng.permutation(n)
        losses = []
        for s in range(steps_per_epoch):
            batch = [episodes[i] for i in perm[s * config.batch_size:(s + 1) * config.batch_size]]
            for p in params:
                p.zero_grad()
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    loss, per = loss_on(model, batch)
                    value = float(loss.data)
                    if not math.isfinite(value):
                        raise TrainingDivergedError(step, value)
                    loss.backward()
            except NumericDomainError as exc:
                raise TrainingDivergedError(step, float("nan")) from exc
            opt.step(learning_rate(config, step, total))
            losses.extend(per.tolist())
            step += 1
        # fsum is order-independent, so a frozen model gives a flat curve
        curve.append(math.fsum(losses) / n)
        log.debug("epoch %d loss %.6f", epoch, curve[-1])
    return TrainResult(model, curve, config, initial)
