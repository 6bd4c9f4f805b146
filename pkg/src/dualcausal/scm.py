"""Exact discrete structural causal models over bias/confounder/video/text/label.

Everything here is computed by enumerating the full joint table, so results are
exact up to float64 round-off. Interventions are computed two ways: by graph
surgery (ground truth) and by the back-door / front-door adjustment formulas,
which are only evaluated after the corresponding graphical criterion has been
checked with d-separation.

Variable names follow the usual convention: ``B`` cross-modal bias, ``Z`` visual
confounder, ``V`` video, ``T`` text, ``M`` mediator and ``Y`` label.
"""
from __future__ import annotations

import itertools
import json
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import networkx as nx
import numpy as np

from .errors import (
    CriterionNotSatisfiedError,
    ParseError,
    SpecValidationError,
    UndefinedConditionalError,
)

MAX_CARD = 8
ROW_TOL = 1e-12

# Edge sets for the graph configurations used by the oracle.
GRAPHS: dict[str, tuple[tuple[str, str], ...]] = {
    # pretrained-VLM view: bias reaches both modalities and the label
    "vlm": (("B", "V"), ("B", "T"), ("B", "Y"), ("Z", "V"), ("Z", "Y"),
            ("V", "M"), ("M", "Y"), ("T", "Y"), ("V", "Y")),
    # independent video encoder: B no longer reaches V
    "textual": (("B", "T"), ("B", "Y"), ("Z", "V"), ("Z", "Y"),
                ("V", "M"), ("M", "Y"), ("T", "Y"), ("V", "Y")),
    # mediator carries the whole effect of V (B may still reach V)
    "visual": (("B", "V"), ("B", "T"), ("B", "Y"), ("Z", "V"), ("Z", "Y"),
               ("V", "M"), ("M", "Y"), ("T", "Y")),
    # both adjustments identified in the same model
    "dual": (("B", "T"), ("B", "Y"), ("Z", "V"), ("Z", "Y"),
             ("V", "M"), ("M", "Y"), ("T", "Y")),
}
VARIABLES = ("B", "Z", "V", "T", "M", "Y")


@dataclass(frozen=True)
class Distribution:
    """A probability vector over the values ``0..len(probs)-1`` of one variable."""

    variable: str
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if (p < -ROW_TOL).any() or abs(p.sum() - 1.0) > 1e-12:
            raise SpecValidationError(f"not a probability vector: {p}")
        object.__setattr__(self, "probs", p)

    @property
    def support(self) -> range:
        return range(len(self.probs))

    def __getitem__(self, value: int) -> float:
        return float(self.probs[value])


@dataclass(frozen=True)
class DiscreteSCM:
    """Finite-state SCM given by one conditional table per variable.

    ``cpts[x]`` has shape ``(*[cards[p] for p in parents[x]], cards[x])``.
    """

    cards: Mapping[str, int]
    parents: Mapping[str, tuple[str, ...]]
    cpts: Mapping[str, np.ndarray]
    order: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        cards = {k: int(v) for k, v in self.cards.items()}
        parents = {k: tuple(self.parents.get(k, ())) for k in cards}
        cpts = {k: np.asarray(v, dtype=np.float64) for k, v in self.cpts.items()}
        for name, card in cards.items():
            if not 1 <= card <= MAX_CARD:
                raise SpecValidationError(f"cardinality of {name} must be in 1..{MAX_CARD}")
            for p in parents[name]:
                if p not in cards:
                    raise SpecValidationError(f"{name} has unknown parent {p}")
        g = nx.DiGraph()
        g.add_nodes_from(cards)
        g.add_edges_from((p, c) for c, ps in parents.items() for p in ps)
        if not nx.is_directed_acyclic_graph(g):
            raise SpecValidationError("graph has a directed cycle")
        for name in cards:
            if name not in cpts:
                raise SpecValidationError(f"missing table for {name}")
            want = tuple(cards[p] for p in parents[name]) + (cards[name],)
            t = cpts[name]
            if t.shape != want:
                raise SpecValidationError(f"table for {name} has shape {t.shape}, expected {want}")
            if (t < 0).any() or np.abs(t.sum(axis=-1) - 1.0).max() > ROW_TOL:
                raise SpecValidationError(f"table rows for {name} are not probability vectors")
        order = tuple(nx.lexicographical_topological_sort(g))
        object.__setattr__(self, "cards", cards)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "cpts", cpts)
        object.__setattr__(self, "order", order)

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.order)
        g.add_edges_from((p, c) for c in self.order for p in self.parents[c])
        return g

    def axis(self, name: str) -> int:
        return self.order.index(name)

    def joint(self) -> np.ndarray:
        """Full joint table with one axis per variable, in ``self.order``."""
        letters = dict(zip(self.order, string.ascii_letters))
        operands, subs = [], []
        for name in self.order:
            subs.append("".join(letters[p] for p in self.parents[name]) + letters[name])
            operands.append(self.cpts[name])
        out = "".join(letters[n] for n in self.order)
        return np.einsum(",".join(subs) + "->" + out, *operands)

    def mutilate(self, do: Mapping[str, int]) -> "DiscreteSCM":
        """Cut every edge into the intervened variables and pin their values."""
        parents = dict(self.parents)
        cpts = dict(self.cpts)
        for name, value in do.items():
            if not 0 <= value < self.cards[name]:
                raise ValueError(f"{name}={value} outside its support")
            parents[name] = ()
            cpts[name] = np.eye(self.cards[name])[value]
        return DiscreteSCM(self.cards, parents, cpts)

    def sample(self, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Ancestral sampling of ``n`` joint draws."""
        out: dict[str, np.ndarray] = {}
        for name in self.order:
            table = self.cpts[name]
            rows = table[tuple(out[p] for p in self.parents[name])] if self.parents[name] else (
                np.broadcast_to(table, (n, self.cards[name])))
            cum = np.cumsum(rows, axis=-1)
            u = rng.random(n)[:, None]
            out[name] = np.minimum((u > cum).sum(axis=-1), self.cards[name] - 1)
        return out


# exact queries -----------------------------------------------------------------

def conditional(scm: DiscreteSCM, target: str, evidence: Mapping[str, int] | None = None,
                joint: np.ndarray | None = None) -> Distribution:
    """P(target | evidence) by conditioning the joint table."""
    table = scm.joint() if joint is None else joint
    index = [slice(None)] * len(scm.order)
    for name, value in (evidence or {}).items():
        index[scm.axis(name)] = value
    sub = table[tuple(index)]
    keep = [n for n in scm.order if n not in (evidence or {})]
    tgt = keep.index(target)
    marg = sub.sum(axis=tuple(i for i in range(len(keep)) if i != tgt))
    total = marg.sum()
    if total <= 0:
        raise UndefinedConditionalError(f"P({evidence}) = 0")
    return Distribution(target, marg / total)


def interventional(scm: DiscreteSCM, target: str, do: Mapping[str, int],
                   evidence: Mapping[str, int] | None = None) -> Distribution:
    """Ground truth P(target | evidence, do(...)) by graph surgery and enumeration."""
    return conditional(scm.mutilate(do), target, evidence)


def observational(scm: DiscreteSCM, v: int, t: int) -> Distribution:
    """P(Y | V=v, T=t) as a sum over the bias and confounder strata.

    Uses the chain rule P(z, b | v, t) = P(z | v, t) P(b | v, t, z), which is exact
    for every graph; see :func:`factorized_observational` for the shortcut that
    replaces the second factor by P(b | t).
    """
    joint = scm.joint()
    ev = {"V": v, "T": t}
    pz = conditional(scm, "Z", ev, joint)
    probs = np.zeros(scm.cards["Y"])
    for z in pz.support:
        if pz[z] == 0:
            continue
        pb = conditional(scm, "B", {**ev, "Z": z}, joint)
        for b in pb.support:
            if pb[b] == 0:
                continue
            py = conditional(scm, "Y", {**ev, "Z": z, "B": b}, joint)
            probs += py.probs * pz[z] * pb[b]
    return Distribution("Y", _renorm(probs))


def factorized_observational(scm: DiscreteSCM, v: int, t: int) -> Distribution:
    """sum_z sum_b P(Y|v,t,z,b) P(z|v,t) P(b|t).

    Equal to P(Y|v,t) only when Z is independent of B given (V, T) and B is
    independent of V given T; :func:`factorization_holds` checks both.
    """
    joint = scm.joint()
    pz = conditional(scm, "Z", {"V": v, "T": t}, joint)
    pb = conditional(scm, "B", {"T": t}, joint)
    probs = np.zeros(scm.cards["Y"])
    for z, b in itertools.product(pz.support, pb.support):
        w = pz[z] * pb[b]
        if w == 0:
            continue
        probs += w * conditional(scm, "Y", {"V": v, "T": t, "Z": z, "B": b}, joint).probs
    return Distribution("Y", _renorm(probs))


def factorization_holds(scm: DiscreteSCM) -> bool:
    g = scm.graph()
    return nx.is_d_separator(g, {"Z"}, {"B"}, {"V", "T"}) and nx.is_d_separator(g, {"B"}, {"V"}, {"T"})


# graphical criteria ---------------------------------------------------------------

def _without_out_edges(g: nx.DiGraph, node: str) -> nx.DiGraph:
    h = g.copy()
    h.remove_edges_from(list(g.out_edges(node)))
    return h


def backdoor_criterion(scm: DiscreteSCM, treatment: str, outcome: str,
                       adjust: set[str], given: set[str] = frozenset()) -> bool:
    """Whether ``adjust`` (together with ``given``) blocks every back-door path.

    Requires that no adjusted or conditioned variable descends from the
    treatment and that treatment and outcome are d-separated by them once the
    treatment's outgoing edges are removed.
    """
    g = scm.graph()
    cond = set(adjust) | set(given)
    if cond & nx.descendants(g, treatment):
        return False
    return nx.is_d_separator(_without_out_edges(g, treatment), {treatment}, {outcome}, cond)


def frontdoor_criterion(scm: DiscreteSCM, treatment: str, mediator: str, outcome: str) -> bool:
    """The three front-door conditions for a single mediator variable."""
    g = scm.graph()
    # 1. every directed treatment->outcome path passes through the mediator
    h = g.copy()
    h.remove_node(mediator)
    if nx.has_path(h, treatment, outcome):
        return False
    if not nx.has_path(g, treatment, mediator):
        return False
    # 2. no unblocked back-door path treatment -> mediator
    if not nx.is_d_separator(_without_out_edges(g, treatment), {treatment}, {mediator}, set()):
        return False
    # 3. treatment blocks every back-door path mediator -> outcome
    return nx.is_d_separator(_without_out_edges(g, mediator), {mediator}, {outcome}, {treatment})


# adjustment formulas ------------------------------------------------------------------

def do_T_backdoor(scm: DiscreteSCM, v: int, t: int) -> Distribution:
    """P(Y | V=v, do(T=t)) ~= sum_b P(Y | v, t, b) P(b).

    The formula is only evaluated when B (with V) satisfies the back-door
    criterion for (T, Y) and B is marginally independent of V, which is what
    makes P(b | v, do(t)) = P(b).
    """
    if not backdoor_criterion(scm, "T", "Y", {"B"}, {"V"}):
        raise CriterionNotSatisfiedError("{B, V} does not block the back-door paths from T to Y")
    if not nx.is_d_separator(scm.graph(), {"B"}, {"V"}, set()):
        raise CriterionNotSatisfiedError("B and V are dependent, so P(b | v) != P(b)")
    joint = scm.joint()
    pb = conditional(scm, "B", None, joint)
    probs = np.zeros(scm.cards["Y"])
    for b in pb.support:
        if pb[b] == 0:
            continue
        probs += pb[b] * conditional(scm, "Y", {"V": v, "T": t, "B": b}, joint).probs
    return Distribution("Y", _renorm(probs))


def do_V_frontdoor(scm: DiscreteSCM, v: int) -> Distribution:
    """P(Y | do(V=v)) = sum_m P(m | v) sum_v' P(v') P(Y | m, v')."""
    if not frontdoor_criterion(scm, "V", "M", "Y"):
        raise CriterionNotSatisfiedError("M does not satisfy the front-door criterion for (V, Y)")
    joint = scm.joint()
    pm = conditional(scm, "M", {"V": v}, joint)
    pv = conditional(scm, "V", None, joint)
    probs = np.zeros(scm.cards["Y"])
    for m in pm.support:
        if pm[m] == 0:
            continue
        inner = np.zeros(scm.cards["Y"])
        for vv in pv.support:
            if pv[vv] == 0:
                continue
            inner += pv[vv] * conditional(scm, "Y", {"M": m, "V": vv}, joint).probs
        probs += pm[m] * inner
    return Distribution("Y", _renorm(probs))


def backdoor_adjust(scm: DiscreteSCM, treatment: str, value: int, outcome: str,
                    adjust: tuple[str, ...]) -> Distribution:
    """sum_a P(outcome | treatment, a) P(a) for an arbitrary adjustment set."""
    if not backdoor_criterion(scm, treatment, outcome, set(adjust)):
        raise CriterionNotSatisfiedError(f"{set(adjust)} is not a back-door set for ({treatment}, {outcome})")
    joint = scm.joint()
    probs = np.zeros(scm.cards[outcome])
    for combo in itertools.product(*(range(scm.cards[a]) for a in adjust)):
        ev = dict(zip(adjust, combo))
        w = _prob(scm, ev, joint)
        if w == 0:
            continue
        probs += w * conditional(scm, outcome, {treatment: value, **ev}, joint).probs
    return Distribution(outcome, _renorm(probs))


def _prob(scm: DiscreteSCM, event: Mapping[str, int], joint: np.ndarray) -> float:
    index = [slice(None)] * len(scm.order)
    for name, value in event.items():
        index[scm.axis(name)] = value
    return float(joint[tuple(index)].sum())


def _renorm(p: np.ndarray) -> np.ndarray:
    # sums of exact probabilities drift by a few ulps
    return p / p.sum()


# sampling oracle -------------------------------------------------------------------

def monte_carlo(scm: DiscreteSCM, target: str, value: int, n: int, rng: np.random.Generator,
                evidence: Mapping[str, int] | None = None,
                do: Mapping[str, int] | None = None) -> tuple[float, float]:
    """Estimate P(target=value | evidence[, do]) by (rejection) sampling.

    Returns the estimate and its binomial standard error.
    """
    model = scm.mutilate(do) if do else scm
    draws = model.sample(n, rng)
    keep = np.ones(n, dtype=bool)
    for name, v in (evidence or {}).items():
        keep &= draws[name] == v
    k = int(keep.sum())
    if k == 0:
        raise UndefinedConditionalError("no samples satisfied the evidence")
    p = float((draws[target][keep] == value).mean())
    return p, float(np.sqrt(max(p * (1 - p), 1e-12) / k))


# random models and fixtures --------------------------------------------------------------

def random_scm(rng: np.random.Generator, graph: str = "dual", max_card: int = 4,
               concentration: float = 1.0) -> DiscreteSCM:
    """Random SCM with Dirichlet tables over one of the :data:`GRAPHS` configurations."""
    edges = GRAPHS[graph]
    cards = {v: int(rng.integers(2, max_card + 1)) for v in VARIABLES}
    parents = {v: tuple(p for p, c in edges if c == v) for v in VARIABLES}
    cpts = {}
    for v in VARIABLES:
        shape = tuple(cards[p] for p in parents[v])
        rows = rng.dirichlet(np.full(cards[v], concentration), size=shape or None)
        cpts[v] = rows / rows.sum(axis=-1, keepdims=True)
    return DiscreteSCM(cards, parents, cpts)


def to_document(scm: DiscreteSCM, name: str = "") -> dict:
    return {
        "name": name,
        "variables": [
            {
                "name": v,
                "card": scm.cards[v],
                "parents": list(scm.parents[v]),
                "cpt": scm.cpts[v].reshape(-1, scm.cards[v]).tolist(),
            }
            for v in scm.order
        ],
    }


def from_document(doc: Mapping) -> DiscreteSCM:
    """Build an SCM from a fixture document.

    CPT rows are listed in row-major order over the parent configurations.
    """
    try:
        entries = doc["variables"]
        cards = {e["name"]: int(e["card"]) for e in entries}
        parents = {e["name"]: tuple(e["parents"]) for e in entries}
        cpts = {}
        for e in entries:
            shape = tuple(cards[p] for p in parents[e["name"]]) + (cards[e["name"]],)
            rows = np.asarray(e["cpt"], dtype=np.float64)
            if rows.size != int(np.prod(shape)):
                raise ParseError(f"cpt of {e['name']}: expected {int(np.prod(shape[:-1]))} rows "
                                 f"of length {shape[-1]}")
            cpts[e["name"]] = rows.reshape(shape)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed SCM document: {exc!r}") from exc
    return DiscreteSCM(cards, parents, cpts)


def save_fixture(scm: DiscreteSCM, path, name: str = "") -> None:
    Path(path).write_text(json.dumps(to_document(scm, name), indent=1))


def load_fixture(path) -> DiscreteSCM:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return from_document(doc)


# oracle suite --------------------------------------------------------------------------

IDENTITY_TOL = 1e-12


def _gap(a: Distribution, b: Distribution) -> float:
    return float(np.max(np.abs(a.probs - b.probs)))


def verify_identities(scm: DiscreteSCM, tol: float = IDENTITY_TOL) -> list[tuple[str, bool, float]]:
    """Check every adjustment identity whose criterion holds against graph surgery.

    Returns ``(name, passed, max_abs_gap)`` triples; identities whose graphical
    criterion fails for this model are skipped, not reported as failures.
    """
    joint = scm.joint()
    results = []

    def record(name, gaps):
        worst = max(gaps) if gaps else 0.0
        results.append((name, worst <= tol, worst))

    vt = [(v, t) for v in range(scm.cards["V"]) for t in range(scm.cards["T"])
          if _prob(scm, {"V": v, "T": t}, joint) > 0]
    record("observational chain rule",
           [_gap(observational(scm, v, t), conditional(scm, "Y", {"V": v, "T": t}, joint)) for v, t in vt])
    if factorization_holds(scm):
        record("factorized observational",
               [_gap(factorized_observational(scm, v, t), conditional(scm, "Y", {"V": v, "T": t}, joint))
                for v, t in vt])
    if backdoor_criterion(scm, "T", "Y", {"B"}):
        record("back-door do(T) over B",
               [_gap(backdoor_adjust(scm, "T", t, "Y", ("B",)), interventional(scm, "Y", {"T": t}))
                for t in range(scm.cards["T"])])
    if backdoor_criterion(scm, "T", "Y", {"B"}, {"V"}) and nx.is_d_separator(scm.graph(), {"B"}, {"V"}, set()):
        record("back-door do(T) given V",
               [_gap(do_T_backdoor(scm, v, t), interventional(scm, "Y", {"T": t}, {"V": v})) for v, t in vt])
    if frontdoor_criterion(scm, "V", "M", "Y"):
        record("front-door do(V)",
               [_gap(do_V_frontdoor(scm, v), interventional(scm, "Y", {"V": v}))
                for v in range(scm.cards["V"])])
    return results


def confounding_demo() -> DiscreteSCM:
    """Binary model in which the bias B drives both T and Y.

    Conditioning on T=1 mostly selects B=1 units, which have a high base rate of
    Y=1, so P(Y=1 | T=1) far exceeds P(Y=1 | do(T=1)).
    """
    edges = GRAPHS["dual"]
    parents = {v: tuple(p for p, c in edges if c == v) for v in VARIABLES}
    cards = dict.fromkeys(VARIABLES, 2)
    cpts = {
        "B": np.array([0.5, 0.5]),
        "Z": np.array([0.6, 0.4]),
        "T": np.array([[0.9, 0.1], [0.1, 0.9]]),                  # T | B
        "V": np.array([[0.8, 0.2], [0.3, 0.7]]),                  # V | Z
        "M": np.array([[0.85, 0.15], [0.2, 0.8]]),                # M | V
    }
    # Y | B, Z, M, T, listed in that parent order
    y1 = np.empty((2, 2, 2, 2))
    for b, z, m, t in itertools.product(range(2), repeat=4):
        y1[b, z, m, t] = 0.05 + 0.6 * b + 0.1 * z + 0.1 * m + 0.1 * t
    order = [p for p in parents["Y"]]
    y1 = np.transpose(y1, [("B", "Z", "M", "T").index(p) for p in order])
    cpts["Y"] = np.stack([1 - y1, y1], axis=-1)
    return DiscreteSCM(cards, parents, cpts)


def bundled_fixtures() -> dict[str, DiscreteSCM]:
    """The SCM fixtures shipped with the package, keyed by file stem."""
    root = resources.files("dualcausal") / "fixtures"
    return {p.name[:-5]: from_document(json.loads(p.read_text()))
            for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".json")}
