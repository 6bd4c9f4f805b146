"""Evaluation report for a trained model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..model import DualCausalModel
from ..synthworld import Episode, cooccurrence_matrix
from .diagnostics import coclassification_from_predictions, matching_stats
from .metrics import mean_average_precision, one_hot, topk_accuracy


@dataclass
class MetricsReport:
    acc_at_1: float
    acc_at_5: float
    map: float
    matching: np.ndarray
    cooccurrence: np.ndarray
    coclassification: np.ndarray | None = None
    loss_curve: list[float] = field(default_factory=list)
    excluded_classes: list[int] = field(default_factory=list)
    absent_atomic: list[int] = field(default_factory=list)
    never_predicted: list[int] = field(default_factory=list)
    mode: str = "single"

    def row(self) -> dict[str, float]:
        return {"acc1": self.acc_at_1, "acc5": self.acc_at_5, "map": self.map}


def _hit_at_k(scores: np.ndarray, targets: np.ndarray, k: int) -> float:
    k = min(k, scores.shape[1])
    top = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    return float(np.take_along_axis(targets, top, axis=1).max(axis=1).mean())


def evaluate(model: DualCausalModel, episodes: Sequence[Episode], mode: str | None = None,
             threshold: float = 0.5, loss_curve: Sequence[float] = ()) -> MetricsReport:
    """Accuracy, mAP and diagnostic matrices on ``episodes``.

    Single-label: Acc@k over long-term classes and mAP of one-vs-rest rankings
    of the class probabilities. Multi-label: a hit counts when one of the top-k
    atomic scores is a true action, and mAP runs over atomic actions.
    """
    if not episodes:
        raise ValueError("evaluation set is empty")
    mode = mode or model.head.mode
    if mode != model.head.mode:
        raise ValueError(f"model is {model.head.mode!r}-label, asked for {mode!r}")
    scores = model.scores(episodes)
    A = len(episodes[0].atomic_labels)
    matching, absent = matching_stats(model, episodes, A)
    cooc = cooccurrence_matrix(episodes, A)
    if mode == "single":
        y = np.array([e.y for e in episodes])
        targets = one_hot(y, scores.shape[1])
        acc1, acc5 = topk_accuracy(scores, y, 1), topk_accuracy(scores, y, 5)
        cocls, never = None, []
    else:
        targets = np.stack([e.atomic_labels for e in episodes])
        acc1, acc5 = _hit_at_k(scores, targets, 1), _hit_at_k(scores, targets, 5)
        cocls, never = coclassification_from_predictions(scores >= threshold)
    mean_ap, excluded = mean_average_precision(scores, targets)
    return MetricsReport(acc_at_1=acc1, acc_at_5=acc5, map=mean_ap, matching=matching,
                         cooccurrence=cooc, coclassification=cocls, loss_curve=list(loss_curve),
                         excluded_classes=excluded, absent_atomic=absent, never_predicted=never,
                         mode=mode)
