"""Cross-modal interaction and the per-class linear read-out."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import InvalidArgumentError, ShapeError
from .numerics import Param, Tensor

MODES = ("single", "multi")


@dataclass
class HeadParams:
    w: Param
    b: Param
    mode: str = "single"

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ShapeError(f"head shapes w={self.w.shape}, b={self.b.shape} are inconsistent")

    @classmethod
    def init(cls, classes: int, dim: int, mode: str = "single", scale: float = 1.0) -> "HeadParams":
        # w = scale makes the initial logit a plain dot product <t'_c, v'_c>
        return cls(Param(np.full((classes, dim), scale), "head.w"), Param(np.zeros(classes), "head.b"), mode)

    def params(self) -> list[Param]:
        return [self.w, self.b]


def interact(t_prime, v_prime) -> Tensor:
    t_prime, v_prime = nm.as_tensor(t_prime), nm.as_tensor(v_prime)
    if t_prime.shape[-2:] != v_prime.shape[-2:]:
        raise ShapeError(f"cannot interact {t_prime.shape} with {v_prime.shape}")
    return nm.mul(t_prime, v_prime)


def logits(interaction, head: HeadParams) -> Tensor:
    """logit_c = sum_d w[c, d] f[c, d] + b[c]; shape (..., C)."""
    interaction = nm.as_tensor(interaction)
    if interaction.shape[-2:] != head.w.shape:
        raise ShapeError(f"interaction {interaction.shape} does not match head {head.w.shape}")
    return nm.add(nm.sum_(nm.mul(interaction, head.w), axis=-1), head.b)


def predict(interaction, head: HeadParams) -> Tensor:
    """Softmax class probabilities, or per-class logistic scores in multi-label mode."""
    z = logits(interaction, head)
    if head.mode == "single":
        return nm.softmax_temp(z, 1.0, axis=-1)
    return nm.sigmoid(z)
