"""The end-to-end recognizer and its four ablation variants.

============  ==============================  ===================================
variant       text embeddings used            visual embeddings used
============  ==============================  ===================================
baseline      raw bank T                      mean over frames of encoded V
tci_only      debiased T' (textual step)      mean over frames of encoded V
vci_only      raw bank T as the mediator      deconfounded V' (visual step)
full          debiased T'                     deconfounded V' guided by T'
============  ==============================  ===================================
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import classifier, numerics as nm, tci, vci
from .classifier import HeadParams
from .errors import InvalidArgumentError
from .numerics import Param, Tensor
from .synthworld import Episode, World
from .tci import ApproximatorH, TextBank
from .vci import ApproximatorG, STAStack

VARIANTS = ("baseline", "tci_only", "vci_only", "full")


@dataclass
class Trace:
    """Intermediate tensors of one forward pass (batched along axis 0)."""

    t_prime: Tensor
    v_h: Tensor
    v_prime: Tensor
    logits: Tensor
    bias_scores: Tensor | None = None
    bias_embeddings: Tensor | None = None
    fine_scores: Tensor | None = None
    v_hat: Tensor | None = None


@dataclass
class DualCausalModel:
    text: TextBank
    h: ApproximatorH
    stack: STAStack
    g: ApproximatorG
    head: HeadParams
    variant: str = "full"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidArgumentError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @classmethod
    def init(cls, world: World, rng: np.random.Generator, variant: str = "full", mode: str = "single",
             layers: int = vci.DEFAULT_LAYERS, heads: int = vci.DEFAULT_HEADS,
             tau_text: float = tci.DEFAULT_TAU_TEXT, tau_vis: float = vci.DEFAULT_TAU_VIS) -> "DualCausalModel":
        """Text bank from the world's prototypes, identity-preserving h and g.

        Multi-label models score atomic actions, so their bank starts from the
        atomic prototypes instead of the class text prototypes.
        """
        spec = world.spec
        protos = world.class_text_prototypes if mode == "single" else world.atomic_prototypes
        D = spec.feature_dim
        return cls(
            text=TextBank.from_prototypes(protos, tau_text),
            h=ApproximatorH.identity(D),
            stack=STAStack.init(spec.frames_per_episode, D, layers, rng, heads=heads, tau_vis=tau_vis),
            g=ApproximatorG.identity(D),
            head=HeadParams.init(protos.shape[0], D, mode),
            variant=variant,
        )

    @property
    def uses_tci(self) -> bool:
        return self.variant in ("tci_only", "full")

    @property
    def uses_vci(self) -> bool:
        return self.variant in ("vci_only", "full")

    @property
    def num_outputs(self) -> int:
        return self.text.num_classes

    def all_params(self) -> list[Param]:
        return [self.text.t, *self.h.params(), *self.stack.params(), *self.g.params(), *self.head.params()]

    def params(self) -> list[Param]:
        """Parameters that the current variant actually reads."""
        out = [self.text.t, *self.stack.params(), *self.head.params()]
        if self.uses_tci:
            out += self.h.params()
        if self.uses_vci:
            out += self.g.params()
        return out

    def forward(self, v_p, v) -> Trace:
        v_p, v = nm.as_tensor(v_p), nm.as_tensor(v)
        C, D = self.text.t.shape
        lead = v.shape[:-2]
        tr = {}
        if self.uses_tci:
            s = tci.bias_scores(v_p, self.text)
            b = tci.bias_embeddings(s, v_p)
            t_prime = tci.debias(self.text, b, self.h)
            tr.update(bias_scores=s, bias_embeddings=b)
        else:
            t_prime = nm.broadcast_to(self.text.t, lead + (C, D))
        v_h = vci.encode_sta(v, self.stack)
        if self.uses_vci:
            fs = vci.fine_scores(v_h, t_prime, self.stack.tau_vis)
            v_hat = vci.emphasized(fs, v_h)
            v_prime = vci.deconfound(t_prime, v_hat, self.g)
            tr.update(fine_scores=fs, v_hat=v_hat)
        else:
            pooled = nm.mean(v_h, axis=-2, keepdims=True)  # (..., 1, D)
            v_prime = nm.broadcast_to(pooled, lead + (C, D))
        z = classifier.logits(classifier.interact(t_prime, v_prime), self.head)
        return Trace(t_prime=t_prime, v_h=v_h, v_prime=v_prime, logits=z, **tr)

    def logits(self, v_p, v) -> Tensor:
        return self.forward(v_p, v).logits

    def scores(self, episodes: Sequence[Episode], batch: int = 64) -> np.ndarray:
        """Class probabilities (single-label) or per-class scores (multi-label)."""
        out = []
        with nm.no_grad():
            for i in range(0, len(episodes), batch):
                vp, v = stack_inputs(episodes[i:i + batch])
                z = self.logits(vp, v)
                p = nm.softmax_temp(z, 1.0, axis=-1) if self.head.mode == "single" else nm.sigmoid(z)
                out.append(p.data)
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.num_outputs))

    def text_embeddings(self, v_p) -> np.ndarray:
        """Text bank the classifier sees for these VLM frames: T, or T' when debiasing."""
        with nm.no_grad():
            v_p = nm.as_tensor(v_p)
            if not self.uses_tci:
                return np.broadcast_to(self.text.t.data, v_p.shape[:-2] + self.text.t.shape).copy()
            return tci.textual_intervention(v_p, self.text, self.h).data

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.all_params()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = {p.name: p for p in self.all_params()}
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"state is missing {sorted(missing)}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.copy()
            p.zero_grad()


def stack_inputs(episodes: Sequence[Episode]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([e.v_p for e in episodes]), np.stack([e.v for e in episodes])
