"""Synthetic long-term-action episodes with injected bias and confounders.

An episode is a class label plus an ordered sequence of atomic actions laid out
over ``L`` frames. Two feature channels are rendered from the same sequence:

* ``v_p`` plays the pretrained vision-language encoder. Frames of confounder
  actions are pulled toward the text prototype of a wrong ("spurious") class by
  ``bias_strength``.
* ``v`` plays the independent video encoder. Every frame carries the offset of
  the episode's visual confounder ``Z`` scaled by ``confounder_strength``.

In the ``"observational"`` regime ``Z`` and the confounder actions are
associated with the label; the ``"interventional"`` regime removes both
associations and is what held-out evaluation uses.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GenerationError, ParseError, SpecValidationError

REGIMES = ("observational", "interventional")


@dataclass(frozen=True)
class WorldSpec:
    num_classes: int
    num_atomic: int
    frames_per_episode: int
    feature_dim: int
    cooccur_rules: tuple[tuple[int, ...], ...]
    exclusive_owner: tuple[int, ...] = ()
    order_rules: tuple[tuple[int, int, int], ...] = ()
    confounder_actions: tuple[tuple[int, int], ...] = ()
    bias_strength: float = 0.0
    confounder_strength: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0
    num_confounders: int = 2
    confounder_prob: float = 0.3
    spurious_prob: float = 0.9
    confounder_corr: float = 0.9
    text_noise: float = 0.5

    def __post_init__(self):
        # normalise list inputs (e.g. parsed JSON) into hashable tuples
        object.__setattr__(self, "cooccur_rules", tuple(tuple(int(a) for a in r) for r in self.cooccur_rules))
        owners = tuple(int(o) for o in self.exclusive_owner) or (-1,) * self.num_atomic
        object.__setattr__(self, "exclusive_owner", owners)
        object.__setattr__(self, "order_rules", tuple(tuple(int(x) for x in r) for r in self.order_rules))
        object.__setattr__(self, "confounder_actions",
                           tuple(tuple(int(x) for x in r) for r in self.confounder_actions))

    def validate(self) -> None:
        """Raise :class:`SpecValidationError` naming the first violated rule."""
        C, A = self.num_classes, self.num_atomic
        for name in ("num_classes", "num_atomic", "frames_per_episode", "feature_dim", "num_confounders"):
            if getattr(self, name) < 1:
                raise SpecValidationError(f"{name} must be >= 1")
        for name in ("bias_strength", "confounder_strength", "noise_sigma", "text_noise"):
            if getattr(self, name) < 0:
                raise SpecValidationError(f"{name} must be >= 0")
        for name in ("confounder_prob", "spurious_prob", "confounder_corr"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SpecValidationError(f"{name} must lie in [0, 1]")
        if len(self.cooccur_rules) != C:
            raise SpecValidationError(f"cooccur_rules: expected {C} classes, got {len(self.cooccur_rules)}")
        if len(self.exclusive_owner) != A:
            raise SpecValidationError(f"exclusive_owner: expected {A} entries")
        for c, rule in enumerate(self.cooccur_rules):
            if not rule:
                raise SpecValidationError(f"cooccur_rules[{c}] is empty")
            for a in rule:
                if not 0 <= a < A:
                    raise SpecValidationError(f"cooccur_rules[{c}] references unknown atomic action {a}")
        for a, owner in enumerate(self.exclusive_owner):
            if owner < 0:
                continue
            holders = [c for c, rule in enumerate(self.cooccur_rules) if a in rule]
            if holders != [owner]:
                raise SpecValidationError(
                    f"exclusive action {a} must appear only in class {owner}, found in {holders}")
        for c, before, after in self.order_rules:
            if not 0 <= c < C:
                raise SpecValidationError(f"order rule references unknown class {c}")
            rule = self.cooccur_rules[c]
            if before not in rule or after not in rule:
                raise SpecValidationError(
                    f"order rule ({c}, {before}, {after}) references actions absent from class {c}")
        for a, spur in self.confounder_actions:
            if not 0 <= a < A or not 0 <= spur < C:
                raise SpecValidationError(f"confounder action ({a}, {spur}) out of range")
            if self.exclusive_owner[a] >= 0:
                raise SpecValidationError(f"confounder action {a} cannot be exclusive")
        longest = max(len(r) for r in self.cooccur_rules) + len(self.confounder_actions)
        if longest > self.frames_per_episode:
            raise SpecValidationError(
                f"frames_per_episode={self.frames_per_episode} cannot hold {longest} actions")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = [list(x) if isinstance(x, tuple) else x for x in v]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WorldSpec":
        return cls(**d)


@dataclass(frozen=True)
class World:
    spec: WorldSpec
    atomic_prototypes: np.ndarray
    class_text_prototypes: np.ndarray
    confounder_offsets: np.ndarray
    bias_directions: np.ndarray

    @property
    def spurious_class(self) -> dict[int, int]:
        return dict(self.spec.confounder_actions)


@dataclass
class Episode:
    v_p: np.ndarray
    v: np.ndarray
    y: int
    atomic_labels: np.ndarray
    confounder_id: int
    frame_atomic: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, Episode):
            return NotImplemented
        return (self.y == other.y and self.confounder_id == other.confounder_id
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("v_p", "v", "atomic_labels", "frame_atomic")))


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def build_world(spec: WorldSpec) -> World:
    """Draw unit-norm prototypes for every latent factor from ``spec.seed``."""
    spec.validate()
    rng = np.random.default_rng([spec.seed, 0])
    A, C, D = spec.num_atomic, spec.num_classes, spec.feature_dim
    atomic = _unit_rows(rng.normal(size=(A, D)))
    # class text = mean of its causal actions, blurred by text_noise
    conf = {a for a, _ in spec.confounder_actions}
    means = np.stack([atomic[[a for a in rule if a not in conf] or list(rule)].mean(axis=0)
                      for rule in spec.cooccur_rules])
    text = _unit_rows(_unit_rows(means) + spec.text_noise * _unit_rows(rng.normal(size=(C, D))))
    offsets = _unit_rows(rng.normal(size=(spec.num_confounders, D)))
    return World(spec, atomic, text, offsets, text.copy())


def _linear_extension(actions: Sequence[int], rules: Iterable[tuple[int, int]],
                      rng: np.random.Generator) -> list[int]:
    """Uniformly pick among the available actions at every step (Kahn's algorithm)."""
    n = len(actions)
    preds = [set() for _ in range(n)]
    for before, after in rules:
        for i, a in enumerate(actions):
            if a != after:
                continue
            for j, b in enumerate(actions):
                if b == before and j != i:
                    preds[i].add(j)
    placed: list[int] = []
    done: set[int] = set()
    while len(placed) < n:
        ready = [i for i in range(n) if i not in done and preds[i] <= done]
        if not ready:
            raise GenerationError(f"order rules over {list(actions)} are cyclic")
        i = ready[int(rng.integers(len(ready)))]
        done.add(i)
        placed.append(i)
    return [actions[i] for i in placed]


def sample_episode(world: World, rng: np.random.Generator, regime: str = "observational") -> Episode:
    spec = world.spec
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}")
    C, L, D = spec.num_classes, spec.frames_per_episode, spec.feature_dim
    nz = spec.num_confounders
    z = int(rng.integers(nz))
    if regime == "observational" and rng.random() < spec.confounder_corr:
        preferred = [c for c in range(C) if c % nz == z] or list(range(C))
        y = int(preferred[int(rng.integers(len(preferred)))])
    else:
        y = int(rng.integers(C))

    seq = list(spec.cooccur_rules[y])
    for a, spur in spec.confounder_actions:
        p = spec.spurious_prob if (regime == "observational" and y == spur) else spec.confounder_prob
        if rng.random() < p and a not in seq:
            seq.append(a)
    rules = [(b, a) for c, b, a in spec.order_rules if c == y]
    seq = _linear_extension(seq, rules, rng)

    # random composition of L frames into len(seq) non-empty segments
    cuts = np.sort(rng.choice(np.arange(1, L), size=len(seq) - 1, replace=False)) if len(seq) > 1 else []
    lengths = np.diff(np.concatenate([[0], cuts, [L]])).astype(int)
    frame_atomic = np.repeat(np.asarray(seq, dtype=np.int64), lengths)

    base = world.atomic_prototypes[frame_atomic]
    spur = world.spurious_class
    bias = np.zeros((L, D))
    for l, a in enumerate(frame_atomic):
        if int(a) in spur:
            bias[l] = world.bias_directions[spur[int(a)]]
    noise_v = rng.normal(size=(L, D))
    noise_p = rng.normal(size=(L, D))
    v = base + spec.confounder_strength * world.confounder_offsets[z] + spec.noise_sigma * noise_v
    v_p = base + spec.bias_strength * bias + spec.noise_sigma * noise_p
    labels = np.zeros(spec.num_atomic)
    labels[np.unique(frame_atomic)] = 1.0
    return Episode(v_p=v_p, v=v, y=y, atomic_labels=labels, confounder_id=z, frame_atomic=frame_atomic)


def sample_dataset(world: World, n: int, seed, regime: str = "observational") -> list[Episode]:
    rng = np.random.default_rng(seed)
    return [sample_episode(world, rng, regime) for _ in range(n)]


def worker_stream(seed: int, worker: int) -> np.random.Generator:
    """Independent per-worker generator, seeded with ``seed XOR worker``."""
    return np.random.default_rng(int(seed) ^ int(worker))


def cooccurrence_matrix(episodes: Sequence[Episode], num_atomic: int) -> np.ndarray:
    """Row-normalised co-occurrence: entry (i, j) = #(i and j) / #(i)."""
    out = np.zeros((num_atomic, num_atomic))
    if not episodes:
        return out
    present = np.stack([e.atomic_labels > 0 for e in episodes]).astype(np.float64)
    both = present.T @ present
    counts = present.sum(axis=0)
    nz = counts > 0
    out[nz] = both[nz] / counts[nz, None]
    return out


def split_digest(*splits: Sequence[Episode]) -> str:
    """SHA-256 over every array of the given episode lists."""
    h = hashlib.sha256()
    for split in splits:
        h.update(b"|split|")
        for e in split:
            for arr in (e.v_p, e.v, e.atomic_labels, e.frame_atomic):
                h.update(np.ascontiguousarray(arr).tobytes())
            h.update(f"{e.y},{e.confounder_id};".encode())
    return h.hexdigest()


# dataset files ------------------------------------------------------------------------

FORMAT = "dualcausal-episodes/1"


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _arr(a: np.ndarray) -> str:
    a = np.asarray(a)
    if a.ndim == 1:
        return "[" + ",".join(_num(x) for x in a) + "]"
    return "[" + ",".join(_arr(r) for r in a) + "]"


def export_dataset(episodes: Sequence[Episode], path, spec: WorldSpec | None = None) -> None:
    """Write one JSON document: a header line then one episode record per line."""
    if episodes:
        L, D = episodes[0].v.shape
        A = episodes[0].atomic_labels.shape[0]
    else:
        L = D = A = 0
    header = {"format": FORMAT, "count": len(episodes), "frames": L, "dim": D, "num_atomic": A,
              "spec": spec.to_dict() if spec is not None else None}
    lines = ['{"header": ' + json.dumps(header, sort_keys=True) + ',', '"episodes": [']
    for i, e in enumerate(episodes):
        rec = (f'{{"y": {int(e.y)}, "confounder_id": {int(e.confounder_id)}, '
               f'"atomic_labels": {_arr(e.atomic_labels)}, '
               f'"frame_atomic": [{",".join(str(int(a)) for a in e.frame_atomic)}], '
               f'"v_p": {_arr(e.v_p)}, "v": {_arr(e.v)}}}')
        lines.append(rec + ("," if i < len(episodes) - 1 else ""))
    lines.append("]}")
    Path(path).write_text("\n".join(lines) + "\n")


def import_dataset(path) -> list[Episode]:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        header, records = doc["header"], doc["episodes"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: missing header or episodes") from exc
    if header.get("format") != FORMAT:
        raise ParseError(f"{path}: field 'format' is {header.get('format')!r}, expected {FORMAT!r}")
    if len(records) != header["count"]:
        raise ParseError(f"{path}: field 'count' says {header['count']} but {len(records)} episodes follow")
    L, D, A = header["frames"], header["dim"], header["num_atomic"]
    out = []
    for i, r in enumerate(records):
        arrays = {}
        for name, shape in (("v_p", (L, D)), ("v", (L, D)), ("atomic_labels", (A,)), ("frame_atomic", (L,))):
            try:
                arr = np.asarray(r[name], dtype=np.int64 if name == "frame_atomic" else np.float64)
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"{path}: episode {i}: field {name!r} missing or not numeric") from exc
            if arr.shape != shape:
                raise ParseError(f"{path}: episode {i}: field {name!r} has shape {arr.shape}, "
                                 f"header implies {shape}")
            arrays[name] = arr
        out.append(Episode(y=int(r["y"]), confounder_id=int(r["confounder_id"]), **arrays))
    return out


def read_header(path) -> dict:
    doc = json.loads(Path(path).read_text())
    return doc["header"]


# presets ------------------------------------------------------------------------------

def breakfast_analog(bias_strength: float = 0.0, confounder_strength: float = 0.0,
                     noise_sigma: float = 0.3, seed: int = 0, **overrides) -> WorldSpec:
    """Four kitchen activities over twelve atomic actions.

    Classes 0 and 1 share ``butter pan`` and ``crack egg`` in opposite orders;
    ``add salt & pepper`` (11) can appear anywhere and is spuriously tied to
    class 0.
    """
    params = dict(
        num_classes=4, num_atomic=12, frames_per_episode=16, feature_dim=32,
        cooccur_rules=(
            (0, 1, 2, 3),     # scrambled egg: butter pan, crack egg, stirfry egg, egg to plate
            (1, 0, 4, 5),     # pancake: crack egg, butter pan, fry pancake, pancake to plate
            (6, 7, 8),        # coffee: pour coffee, pour milk, stir coffee
            (9, 10, 7),       # tea: add teabag, pour water, pour milk
        ),
        exclusive_owner=(-1, -1, 0, 0, 1, 1, 2, -1, 2, 3, 3, -1),
        order_rules=((0, 0, 1), (0, 1, 2), (1, 1, 0), (1, 0, 4), (2, 6, 7), (3, 9, 10)),
        confounder_actions=((11, 0),),
        bias_strength=bias_strength,
        confounder_strength=confounder_strength,
        noise_sigma=noise_sigma,
        seed=seed,
    )
    params.update(overrides)
    return WorldSpec(**params)


ATOMIC_NAMES = ("butter pan", "crack egg", "stirfry egg", "put egg to plate", "fry pancake",
                "put pancake to plate", "pour coffee", "pour milk", "stir coffee", "add teabag",
                "pour water", "add salt & pepper")
CLASS_NAMES = ("make scrambled egg", "make pancake", "make coffee", "make tea")


def strong_bias(**overrides) -> WorldSpec:
    """The desk world with a strong VLM bias and a strong visual confounder."""
    params = dict(bias_strength=2.0, confounder_strength=2.0, noise_sigma=0.5)
    params.update(overrides)
    return breakfast_analog(**params)


PRESETS = {"desk": breakfast_analog, "strong_bias": strong_bias}
