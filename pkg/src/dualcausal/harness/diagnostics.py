"""Matrices behind the matching, co-classification and co-occurrence plots."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..model import DualCausalModel, stack_inputs
from ..synthworld import Episode


def _softmax(x: np.ndarray, tau: float) -> np.ndarray:
    z = x / tau
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def matching_from_embeddings(frames: np.ndarray, frame_atomic: np.ndarray, text: np.ndarray,
                             num_atomic: int, tau: float) -> tuple[np.ndarray, list[int]]:
    """Atomic-to-class matching probabilities from explicit embeddings.

    ``frames`` is (N, L, D), ``frame_atomic`` (N, L) and ``text`` (N, C, D), the
    text bank seen by each episode. Row ``a`` is the softmax over classes (at
    temperature ``tau``) of the mean cosine similarity between frames showing
    ``a`` and each class embedding. Atomic actions with no frames get a zero
    row and are listed in the second return value.
    """
    fn = frames / np.maximum(np.linalg.norm(frames, axis=-1, keepdims=True), 1e-12)
    tn = text / np.maximum(np.linalg.norm(text, axis=-1, keepdims=True), 1e-12)
    sims = np.einsum("nld,ncd->nlc", fn, tn)
    C = text.shape[1]
    out = np.zeros((num_atomic, C))
    absent = []
    for a in range(num_atomic):
        mask = frame_atomic == a
        if not mask.any():
            absent.append(a)
            continue
        out[a] = _softmax(sims[mask].mean(axis=0), tau)
    return out, absent


def matching_stats(model: DualCausalModel, episodes: Sequence[Episode],
                   num_atomic: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Matching between VLM frame features and the model's text bank (T or T')."""
    if num_atomic is None:
        num_atomic = len(episodes[0].atomic_labels) if episodes else 0
    if not episodes:
        return np.zeros((num_atomic, model.num_outputs)), list(range(num_atomic))
    vp, _ = stack_inputs(episodes)
    text = model.text_embeddings(vp)
    fa = np.stack([e.frame_atomic for e in episodes])
    return matching_from_embeddings(vp, fa, text, num_atomic, model.text.tau_text)


def coclassification_from_predictions(predicted: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Entry (i, j) = P(i predicted | j predicted) over rows of a 0/1 matrix.

    Columns whose action is never predicted are zero and reported.
    """
    pred = np.asarray(predicted, dtype=np.float64)
    if pred.ndim != 2:
        raise ValueError("predictions must be (episodes, actions)")
    both = pred.T @ pred
    counts = pred.sum(axis=0)
    out = np.zeros_like(both)
    seen = counts > 0
    out[:, seen] = both[:, seen] / counts[seen]
    return out, [int(j) for j in np.flatnonzero(~seen)]


def coclassification(model: DualCausalModel, episodes: Sequence[Episode],
                     threshold: float = 0.5) -> tuple[np.ndarray, list[int]]:
    if model.head.mode != "multi":
        raise ValueError("co-classification needs a multi-label model")
    if not episodes:
        n = model.num_outputs
        return np.zeros((n, n)), list(range(n))
    return coclassification_from_predictions(model.scores(episodes) >= threshold)
