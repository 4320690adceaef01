"""Logic-aware perturbations of provenance graphs.

Three augmentations produce the contrastive views: edge add/remove (EA),
node add/remove (NA) and same-kind feature replacement (FA). Every edge an
augmentation creates must satisfy the :class:`LogicRuleSet`; edges already
present in the input are kept whether or not they satisfy it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._utils import as_rng, derive_seed, perturb_count
from .graph import Edge, Node, NodeKind, ProvenanceGraph, cleanup

logger = logging.getLogger(__name__)

P, F, N = NodeKind.PROCESS, NodeKind.FILE, NodeKind.NETWORK

AUGMENTATION_KINDS = ("EA", "NA", "FA")

_DEFAULT_ALLOWED = {
    (P, F): ("read", "write"),
    (P, N): ("connect", "send", "recv"),
    (F, P): ("exec", "load"),
    (P, P): ("fork", "clone"),
}
# File->File is absent from the published table; nothing in the vocabulary
# describes a file acting on a file, so it is forbidden.
_DEFAULT_FORBIDDEN = frozenset({(N, P), (F, N), (N, F), (N, N), (F, F)})


@dataclass(frozen=True)
class LogicRuleSet:
    """Which ``(src_kind, dst_kind, label)`` triples augmentation may forge."""

    allowed: Mapping[tuple[NodeKind, NodeKind], tuple[str, ...]] = field(
        default_factory=lambda: dict(_DEFAULT_ALLOWED)
    )
    forbidden: frozenset = _DEFAULT_FORBIDDEN

    def __post_init__(self):
        pairs = {(a, b) for a in NodeKind for b in NodeKind}
        allowed = set(self.allowed)
        if allowed & set(self.forbidden):
            raise ValueError("allowed and forbidden kind pairs overlap")
        if allowed | set(self.forbidden) != pairs:
            raise ValueError("rule set must cover all nine kind pairs")

    def labels_for(self, src_kind: NodeKind, dst_kind: NodeKind) -> tuple[str, ...]:
        return tuple(self.allowed.get((src_kind, dst_kind), ()))

    def is_allowed(self, src_kind: NodeKind, dst_kind: NodeKind, label: str) -> bool:
        return label in self.allowed.get((src_kind, dst_kind), ())


DEFAULT_RULES = LogicRuleSet()


@dataclass(frozen=True)
class AugmentationPlan:
    kinds: frozenset = frozenset(AUGMENTATION_KINDS)
    gamma: float = 0.5
    seed: int = 0
    rules: LogicRuleSet = DEFAULT_RULES

    def __post_init__(self):
        kinds = frozenset(k.upper() for k in self.kinds)
        object.__setattr__(self, "kinds", kinds)
        if not kinds:
            raise ValueError("augmentation plan needs at least one kind")
        if not kinds <= set(AUGMENTATION_KINDS):
            raise ValueError(f"unknown augmentation kinds {sorted(kinds - set(AUGMENTATION_KINDS))}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    def with_seed(self, seed: int) -> AugmentationPlan:
        return replace(self, seed=seed)


def _next_time(edges) -> int:
    return max((e.t for e in edges), default=0) + 1


def _sample_legal_edge(ids, nodes, rules, present, rng, tries=64):
    n = len(ids)
    if n < 2:
        return None
    for _ in range(tries):
        i, j = rng.choice(n, 2, replace=False)
        u, v = ids[i], ids[j]
        labels = rules.labels_for(nodes[u].kind, nodes[v].kind)
        if not labels:
            continue
        label = labels[rng.integers(len(labels))]
        if (u, v, label) not in present:
            return u, v, label
    # dense or rule-starved graph: enumerate what is left
    cands = [
        (u, v, lab)
        for u in ids
        for v in ids
        if u != v
        for lab in rules.labels_for(nodes[u].kind, nodes[v].kind)
        if (u, v, lab) not in present
    ]
    if not cands:
        return None
    return cands[rng.integers(len(cands))]


def _removable_edges(edges, deg):
    return [i for i, e in enumerate(edges) if deg[e.src] > 1 and deg[e.dst] > 1]


def _edges_op(g: ProvenanceGraph, gamma: float, rules: LogicRuleSet, rng) -> ProvenanceGraph:
    slots = perturb_count(gamma, g.n_edges)
    if slots == 0:
        return g
    nodes = g.nodes
    ids = sorted(nodes)
    edges = list(g.edges)
    deg = g.degree()
    present = {(e.src, e.dst, e.kind) for e in edges}
    t_new = _next_time(edges)
    for _ in range(slots):
        add = rng.random() < 0.5
        if add:
            cand = _sample_legal_edge(ids, nodes, rules, present, rng)
            if cand is None:
                add = False
            else:
                u, v, label = cand
                edges.append(Edge(u, v, label, t_new))
                t_new += 1
                present.add(cand)
                deg[u] += 1
                deg[v] += 1
                continue
        # removal never orphans a node and so never empties the edge set
        removable = _removable_edges(edges, deg)
        if removable:
            e = edges.pop(removable[rng.integers(len(removable))])
            deg[e.src] -= 1
            deg[e.dst] -= 1
            if not any((x.src, x.dst, x.kind) == (e.src, e.dst, e.kind) for x in edges):
                present.discard((e.src, e.dst, e.kind))
        elif not add:
            cand = _sample_legal_edge(ids, nodes, rules, present, rng)
            if cand is not None:
                u, v, label = cand
                edges.append(Edge(u, v, label, t_new))
                t_new += 1
                present.add(cand)
                deg[u] += 1
                deg[v] += 1
    return cleanup(g.replace(edges=edges))


def _attachments(kind: NodeKind, nodes, ids, rules):
    """Legal (neighbour, new-node-is-source, labels) options for a new node."""
    out = []
    for w in ids:
        wk = nodes[w].kind
        labels = rules.labels_for(kind, wk)
        if labels:
            out.append((w, True, labels))
        labels = rules.labels_for(wk, kind)
        if labels:
            out.append((w, False, labels))
    return out


def _removable_nodes(nodes, edges, deg):
    incident: dict[str, list[Edge]] = {n: [] for n in nodes}
    for e in edges:
        incident[e.src].append(e)
        incident[e.dst].append(e)
    ok = []
    for v in sorted(nodes):
        inc = incident[v]
        if len(edges) - len(inc) < 1:
            continue
        lost: dict[str, int] = {}
        for e in inc:
            other = e.dst if e.src == v else e.src
            lost[other] = lost.get(other, 0) + 1
        if all(deg[u] - c >= 1 for u, c in lost.items()):
            ok.append(v)
    return ok


def _fresh_id(nodes, counter: int) -> str:
    while True:
        cand = f"~aug{counter}"
        if cand not in nodes:
            return cand
        counter += 1


def _nodes_op(g: ProvenanceGraph, gamma: float, rules: LogicRuleSet, rng) -> ProvenanceGraph:
    slots = perturb_count(gamma, g.n_nodes)
    if slots == 0:
        return g
    nodes = dict(g.nodes)
    edges = list(g.edges)
    deg = g.degree()
    t_new = _next_time(edges)
    kinds = list(NodeKind)
    for slot in range(slots):
        if rng.random() < 0.5:
            removable = _removable_nodes(nodes, edges, deg)
            if removable:
                v = removable[rng.integers(len(removable))]
                kept = []
                for e in edges:
                    if v in (e.src, e.dst):
                        deg[e.src] -= 1
                        deg[e.dst] -= 1
                    else:
                        kept.append(e)
                edges = kept
                del nodes[v]
                del deg[v]
                continue
        ids = sorted(nodes)
        for _ in range(10):
            kind = kinds[rng.integers(len(kinds))]
            options = _attachments(kind, nodes, ids, rules)
            if options:
                break
        else:
            logger.warning("node augmentation slot %d skipped: no legal attachment", slot)
            continue
        new = _fresh_id(nodes, len(nodes) + slot)
        fan_out = min(int(rng.integers(1, 4)), len(options))
        picks = rng.choice(len(options), fan_out, replace=False)
        nodes[new] = Node(kind, kind.value)
        deg[new] = 0
        for p in sorted(picks):
            w, outgoing, labels = options[p]
            label = labels[rng.integers(len(labels))]
            e = Edge(new, w, label, t_new) if outgoing else Edge(w, new, label, t_new)
            t_new += 1
            edges.append(e)
            deg[e.src] += 1
            deg[e.dst] += 1
    return g.replace(nodes=nodes, edges=edges)


def _features_op(g: ProvenanceGraph, gamma: float, rng) -> ProvenanceGraph:
    slots = perturb_count(gamma, g.n_nodes)
    if slots == 0:
        return g
    ids = sorted(g.nodes)
    by_kind: dict[NodeKind, list[str]] = {}
    for n in ids:
        by_kind.setdefault(g.nodes[n].kind, []).append(n)
    nodes = dict(g.nodes)
    for i in rng.choice(len(ids), slots, replace=False):
        v = ids[i]
        donors = [w for w in by_kind[g.nodes[v].kind] if w != v]
        if not donors:
            continue
        w = donors[rng.integers(len(donors))]
        nodes[v] = Node(g.nodes[v].kind, g.nodes[w].feature)
    return g.replace(nodes=nodes)


def augment_edges(g: ProvenanceGraph, plan: AugmentationPlan, rng=None) -> ProvenanceGraph:
    """Add or remove ``ceil(gamma * |E|)`` edges, one fair coin per slot."""
    if "EA" not in plan.kinds:
        raise ValueError("plan does not enable edge augmentation")
    return _edges_op(g, plan.gamma, plan.rules, as_rng(plan.seed if rng is None else rng))


def augment_nodes(g: ProvenanceGraph, plan: AugmentationPlan, rng=None) -> ProvenanceGraph:
    """Insert or delete ``ceil(gamma * |V|)`` nodes.

    Inserted nodes get one to three legal edges. A node is only deleted if
    doing so leaves every other node connected and at least one edge.
    """
    if "NA" not in plan.kinds:
        raise ValueError("plan does not enable node augmentation")
    return _nodes_op(g, plan.gamma, plan.rules, as_rng(plan.seed if rng is None else rng))


def augment_features(g: ProvenanceGraph, plan: AugmentationPlan, rng=None) -> ProvenanceGraph:
    """Replace the features of ``ceil(gamma * |V|)`` nodes with a same-kind donor's."""
    if "FA" not in plan.kinds:
        raise ValueError("plan does not enable feature augmentation")
    return _features_op(g, plan.gamma, as_rng(plan.seed if rng is None else rng))


def augment(g: ProvenanceGraph, plan: AugmentationPlan, rng) -> ProvenanceGraph:
    """Apply the enabled augmentations in the order EA, NA, FA with one generator."""
    if plan.gamma == 0:
        return g
    if "EA" in plan.kinds:
        g = _edges_op(g, plan.gamma, plan.rules, rng)
    if "NA" in plan.kinds:
        g = _nodes_op(g, plan.gamma, plan.rules, rng)
    if "FA" in plan.kinds:
        g = _features_op(g, plan.gamma, rng)
    return g


def make_views(g: ProvenanceGraph, plan: AugmentationPlan, n_views: int = 2) -> list[ProvenanceGraph]:
    if n_views < 2:
        raise ValueError("n_views must be at least 2")
    children = np.random.SeedSequence(plan.seed).spawn(n_views)
    return [augment(g, plan, np.random.default_rng(ss)) for ss in children]


def forged_edges(original: ProvenanceGraph, view: ProvenanceGraph) -> list[Edge]:
    """Edges in ``view`` whose ``(src, dst, label)`` does not occur in ``original``."""
    before = {(e.src, e.dst, e.kind) for e in original.edges}
    return [e for e in view.edges if (e.src, e.dst, e.kind) not in before]


def rule_violations(original: ProvenanceGraph, view: ProvenanceGraph, rules: LogicRuleSet = DEFAULT_RULES):
    return [
        e
        for e in forged_edges(original, view)
        if not rules.is_allowed(view.nodes[e.src].kind, view.nodes[e.dst].kind, e.kind)
    ]


class LogicAwareAugmenter(TransformerMixin, BaseEstimator):
    """Produce one augmented view per input graph.

    Stateless; ``fit`` only exists for pipeline compatibility. The seed for
    graph ``i`` is derived from ``(seed, i)`` so outputs do not depend on
    batch composition.
    """

    def __init__(self, kinds: Sequence[str] = AUGMENTATION_KINDS, gamma: float = 0.5, seed: int = 0):
        self.kinds = kinds
        self.gamma = gamma
        self.seed = seed

    def fit(self, X, y=None):
        AugmentationPlan(frozenset(self.kinds), self.gamma, self.seed)
        return self

    def transform(self, X: Iterable[ProvenanceGraph]) -> list[ProvenanceGraph]:
        plan = AugmentationPlan(frozenset(self.kinds), self.gamma, self.seed)
        return [
            augment(g, plan, np.random.default_rng(derive_seed(self.seed, i)))
            for i, g in enumerate(X)
        ]
