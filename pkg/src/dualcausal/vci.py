"""Visual intervention: front-door deconfounding guided by the debiased text.

The independent video channel is encoded by a stack of pre-norm residual
self-attention blocks. The debiased text bank (the mediator) then scores every
frame per class and per feature dimension; the scores pool the encoded frames
into class-specific emphasized features, and an affine approximator maps
``[t'_c, v_hat_c]`` to the deconfounded embedding ``v'_c``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import InvalidArgumentError, ShapeError
from .numerics import MHSAParams, Param, Tensor

DEFAULT_TAU_VIS = 0.07
DEFAULT_LAYERS = 6
DEFAULT_HEADS = 4


@dataclass
class STAStack:
    blocks: list[MHSAParams]
    pos: Param
    heads: int = DEFAULT_HEADS
    tau_vis: float = DEFAULT_TAU_VIS

    def __post_init__(self):
        if not self.tau_vis > 0:
            raise InvalidArgumentError("tau_vis must be positive")

    @classmethod
    def init(cls, length: int, dim: int, layers: int, rng: np.random.Generator,
             heads: int = DEFAULT_HEADS, tau_vis: float = DEFAULT_TAU_VIS,
             pos_scale: float = 0.1) -> "STAStack":
        if layers < 0:
            raise InvalidArgumentError("layers must be >= 0")
        if dim % heads:
            raise InvalidArgumentError(f"dim {dim} not divisible by {heads} heads")
        blocks = [MHSAParams.init(dim, rng, prefix=f"sta.{i}") for i in range(layers)]
        pos = Param(rng.normal(0.0, pos_scale, (length, dim)), "sta.pos")
        return cls(blocks, pos, heads, tau_vis)

    @property
    def layers(self) -> int:
        return len(self.blocks)

    def params(self) -> list[Param]:
        out = [p for blk in self.blocks for p in blk.params()]
        return out + [self.pos] if self.blocks else out


@dataclass
class ApproximatorG:
    """Affine map R^{2D} -> R^D applied to ``[t'_c, v_hat_c]``."""

    weight: Param
    bias: Param

    @classmethod
    def identity(cls, dim: int, name: str = "g") -> "ApproximatorG":
        w = np.zeros((dim, 2 * dim))
        w[:, dim:] = np.eye(dim)
        return cls(Param(w, f"{name}.weight"), Param(np.zeros(dim), f"{name}.bias"))

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator, name: str = "g") -> "ApproximatorG":
        s = 1.0 / np.sqrt(2 * dim)
        return cls(Param(rng.normal(0, s, (dim, 2 * dim)), f"{name}.weight"),
                   Param(rng.normal(0, s, dim), f"{name}.bias"))

    def params(self) -> list[Param]:
        return [self.weight, self.bias]


def encode_sta(v, stack: STAStack) -> Tensor:
    """Run ``v`` (..., L, D) through every block of the stack."""
    x = nm.as_tensor(v)
    if stack.blocks and x.shape[-2:] != stack.pos.shape:
        raise ShapeError(f"frames {x.shape} do not match positional embedding {stack.pos.shape}")
    for blk in stack.blocks:
        x = nm.mhsa_block(x, blk, stack.heads, stack.pos)
    return x


def fine_scores(v_h, t_prime, tau_vis: float) -> Tensor:
    """s[c, l, d] = softmax over l of v_h[l, d] t'[c, d] / tau; shape (..., C, L, D)."""
    v_h, t_prime = nm.as_tensor(v_h), nm.as_tensor(t_prime)
    if not tau_vis > 0:
        raise InvalidArgumentError("tau_vis must be positive")
    if v_h.shape[-1] != t_prime.shape[-1]:
        raise ShapeError(f"encoded frames {v_h.shape} and mediator {t_prime.shape} disagree on D")
    vh = nm.reshape(v_h, v_h.shape[:-2] + (1,) + v_h.shape[-2:])            # (..., 1, L, D)
    tp = nm.reshape(t_prime, t_prime.shape[:-1] + (1, t_prime.shape[-1]))   # (..., C, 1, D)
    return nm.softmax_temp(nm.mul(vh, tp), tau_vis, axis=-2)


def emphasized(scores, v_h) -> Tensor:
    """v_hat[c, d] = sum_l s[c, l, d] v_h[l, d]; shape (..., C, D)."""
    scores, v_h = nm.as_tensor(scores), nm.as_tensor(v_h)
    if scores.shape[-2:] != v_h.shape[-2:]:
        raise ShapeError(f"scores {scores.shape} do not match encoded frames {v_h.shape}")
    vh = nm.reshape(v_h, v_h.shape[:-2] + (1,) + v_h.shape[-2:])
    return nm.sum_(nm.mul(scores, vh), axis=-2)


def deconfound(t_prime, v_hat, g: ApproximatorG) -> Tensor:
    """v'_c = g([t'_c, v_hat_c]) for every class."""
    t_prime, v_hat = nm.as_tensor(t_prime), nm.as_tensor(v_hat)
    if t_prime.shape[-2:] != v_hat.shape[-2:]:
        raise ShapeError(f"mediator {t_prime.shape} and emphasized features {v_hat.shape} disagree")
    dim = v_hat.shape[-1]
    if g.weight.shape != (dim, 2 * dim):
        raise ShapeError(f"approximator weight {g.weight.shape} is not ({dim}, {2 * dim})")
    shape = np.broadcast_shapes(t_prime.shape, v_hat.shape)
    cat = nm.concat([nm.broadcast_to(t_prime, shape), nm.broadcast_to(v_hat, shape)], axis=-1)
    return nm.linear(cat, g.weight, g.bias)
