"""Ranking metrics: top-k accuracy and non-interpolated average precision."""
from __future__ import annotations

import numpy as np


def topk_accuracy(scores: np.ndarray, labels: np.ndarray, k: int = 1) -> float:
    """Fraction of rows whose true label is among the ``k`` highest scores.

    Ties are resolved by the stable original class order, and ``k`` is capped
    at the number of classes.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape[0] == 0:
        raise ValueError("empty evaluation set")
    k = min(k, scores.shape[1])
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    return float((order == labels[:, None]).any(axis=1).mean())


def average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    """Mean of the precision at the rank of every positive.

    Items are ranked by descending score; equal scores keep their original
    order. Returns ``nan`` when there are no positives.
    """
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positives).astype(bool)
    n_pos = int(pos.sum())
    if n_pos == 0:
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    hits = pos[order]
    ranks = np.flatnonzero(hits) + 1
    return float((np.arange(1, n_pos + 1) / ranks).mean())


def mean_average_precision(scores: np.ndarray, targets: np.ndarray) -> tuple[float, list[int]]:
    """mAP over columns of ``scores`` with 0/1 ``targets`` of the same shape.

    Classes without positives are left out of the mean; their indices are
    returned alongside.
    """
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets)
    aps, skipped = [], []
    for c in range(scores.shape[1]):
        ap = average_precision(scores[:, c], targets[:, c])
        if np.isnan(ap):
            skipped.append(c)
        else:
            aps.append(ap)
    return (float(np.mean(aps)) if aps else float("nan")), skipped


def one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    out = np.zeros((len(labels), classes))
    out[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = 1.0
    return out
