"""Textual intervention: debias class text embeddings against the VLM channel.

The VLM frame features ``v_p`` act as queries for the latent bias. Each class
attends over frames with its text embedding, the attended feature is the bias
surrogate ``b_c``, and an affine approximator maps ``[t_c, b_c]`` to the
debiased embedding ``t'_c``. Inputs may carry a leading batch axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import InvalidArgumentError, ShapeError
from .numerics import Param, Tensor

DEFAULT_TAU_TEXT = 0.07


@dataclass
class TextBank:
    t: Param
    tau_text: float = DEFAULT_TAU_TEXT

    def __post_init__(self):
        if self.t.ndim != 2:
            raise ShapeError("text bank must be (classes, dim)")
        if not self.tau_text > 0:
            raise InvalidArgumentError("tau_text must be positive")

    @classmethod
    def from_prototypes(cls, prototypes: np.ndarray, tau_text: float = DEFAULT_TAU_TEXT) -> "TextBank":
        return cls(Param(np.array(prototypes, dtype=np.float64), "text.t"), tau_text)

    @property
    def num_classes(self) -> int:
        return self.t.shape[0]

    @property
    def dim(self) -> int:
        return self.t.shape[1]


@dataclass
class ApproximatorH:
    """Affine map R^{2D} -> R^D applied to ``[t_c, b_c]``."""

    weight: Param
    bias: Param

    @classmethod
    def identity(cls, dim: int, name: str = "h") -> "ApproximatorH":
        w = np.zeros((dim, 2 * dim))
        w[:, :dim] = np.eye(dim)
        return cls(Param(w, f"{name}.weight"), Param(np.zeros(dim), f"{name}.bias"))

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator, name: str = "h") -> "ApproximatorH":
        s = 1.0 / np.sqrt(2 * dim)
        return cls(Param(rng.normal(0, s, (dim, 2 * dim)), f"{name}.weight"),
                   Param(rng.normal(0, s, dim), f"{name}.bias"))

    def params(self) -> list[Param]:
        return [self.weight, self.bias]


def bias_scores(v_p, text: TextBank) -> Tensor:
    """Per-class softmax over frames of ``v_p[l] . t_c / tau``; shape (..., C, L)."""
    v_p = nm.as_tensor(v_p)
    if v_p.shape[-1] != text.dim:
        raise ShapeError(f"frame features {v_p.shape} do not match text bank {text.t.shape}")
    logits = nm.matmul(text.t, nm.swapaxes(v_p, -1, -2))  # (..., C, L)
    return nm.softmax_temp(logits, text.tau_text, axis=-1)


def bias_embeddings(scores, v_p) -> Tensor:
    """b_c = sum_l s[c, l] v_p[l]; shape (..., C, D)."""
    scores, v_p = nm.as_tensor(scores), nm.as_tensor(v_p)
    if scores.shape[-1] != v_p.shape[-2]:
        raise ShapeError(f"scores {scores.shape} and frames {v_p.shape} disagree on L")
    return nm.matmul(scores, v_p)


def debias(text: TextBank, b, h: ApproximatorH) -> Tensor:
    """t'_c = h([t_c, b_c]) for every class."""
    b = nm.as_tensor(b)
    if b.shape[-2:] != text.t.shape:
        raise ShapeError(f"bias embeddings {b.shape} do not match text bank {text.t.shape}")
    if h.weight.shape != (text.dim, 2 * text.dim):
        raise ShapeError(f"approximator weight {h.weight.shape} is not ({text.dim}, {2 * text.dim})")
    t = nm.broadcast_to(text.t, b.shape)
    return nm.linear(nm.concat([t, b], axis=-1), h.weight, h.bias)


def textual_intervention(v_p, text: TextBank, h: ApproximatorH) -> Tensor:
    return debias(text, bias_embeddings(bias_scores(v_p, text), v_p), h)
