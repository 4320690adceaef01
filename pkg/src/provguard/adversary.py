"""Graph manipulation attacks used to probe robustness.

Detection-phase pollution attacks (GSPA, GFPA, CGPA) act on graphs about to
be scored; training-phase poisoning attacks (SPA, FPA) act on the training
corpus. Attackers are not bound by the augmentation logic rules, but GSPA
and SPA still pick a legal edge label whenever the kind pair has one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from ._utils import derive_seed, perturb_count
from .augmentation import DEFAULT_RULES, LogicRuleSet
from .exceptions import ConfigError, DataError
from .graph import DEFAULT_EDGE_KINDS, Edge, Node, NodeKind, ProvenanceGraph, cleanup

DETECTION_ATTACKS = ("GSPA", "GFPA", "CGPA")
TRAINING_ATTACKS = ("SPA", "FPA")
POLICIES = ("malicious_nodes", "random")


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    rate: float
    seed: int = 0
    phase: str | None = None
    target_policy: str = "malicious_nodes"

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in DETECTION_ATTACKS + TRAINING_ATTACKS:
            raise ConfigError(f"unknown attack {self.kind!r}")
        expected = "detection" if kind in DETECTION_ATTACKS else "training"
        phase = expected if self.phase is None else self.phase
        if phase not in ("detection", "training"):
            raise ConfigError(f"unknown phase {phase!r}")
        if phase != expected:
            raise ConfigError(f"{kind} is a {expected}-phase attack, not {phase}")
        object.__setattr__(self, "phase", phase)
        if not 0.0 <= self.rate <= 1.0:
            raise ConfigError(f"attack rate must lie in [0, 1], got {self.rate}")
        if self.target_policy not in POLICIES:
            raise ConfigError(f"unknown target policy {self.target_policy!r}")

    def describe(self) -> str:
        return f"{self.kind.lower()}:y={self.rate!r}:seed={self.seed}:policy={self.target_policy}"


def parse_attack(
    descriptor: str, phase: str | None = None, target_policy: str = "malicious_nodes", seed: int = 0
) -> AttackSpec:
    """Parse ``kind:y=<rate>[:seed=<int>][:policy=<name>]``.

    ``target_policy`` and ``seed`` fill in fields the descriptor leaves out.
    """
    parts = descriptor.strip().split(":")
    if not parts[0]:
        raise ConfigError(f"invalid attack descriptor {descriptor!r}")
    fields = {"seed": seed, "policy": target_policy}
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep or key not in ("y", "seed", "policy"):
            raise ConfigError(f"invalid attack descriptor field {part!r}")
        fields[key] = value
    if "y" not in fields:
        raise ConfigError("attack descriptor needs a rate, e.g. gspa:y=0.2")
    try:
        rate = float(fields["y"])
        seed = int(fields["seed"])
    except ValueError:
        raise ConfigError(f"invalid number in attack descriptor {descriptor!r}") from None
    return AttackSpec(parts[0], rate, seed, phase, fields["policy"])


def _legal_or_any(src_kind, dst_kind, rules: LogicRuleSet, rng) -> str:
    labels = rules.labels_for(src_kind, dst_kind) or DEFAULT_EDGE_KINDS
    return labels[rng.integers(len(labels))]


def _targets(g: ProvenanceGraph, policy: str) -> tuple[list[str], list[str]]:
    """(attacker-controlled nodes, others). Random policy controls every node."""
    ids = g.sorted_ids()
    if policy == "random":
        return ids, ids
    bad = g.malicious_nodes()
    if not bad:
        raise DataError("graph has no ground-truth malicious nodes")
    bad_set = set(bad)
    return bad, [n for n in ids if n not in bad_set]


def _next_time(g) -> int:
    return max((e.t for e in g.edges), default=0) + 1


def gspa_graph(g: ProvenanceGraph, rate: float, rng, policy: str = "malicious_nodes", rules=DEFAULT_RULES):
    """Add ``ceil(rate * |targets|)`` edges from target nodes to other nodes."""
    sources, sinks = _targets(g, policy)
    count = perturb_count(rate, len(sources))
    if count == 0:
        return g
    edges = list(g.edges)
    t = _next_time(g)
    for _ in range(count):
        u = sources[rng.integers(len(sources))]
        choices = [n for n in sinks if n != u]
        if not choices:
            raise DataError("no node available to connect to")
        v = choices[rng.integers(len(choices))]
        label = _legal_or_any(g.nodes[u].kind, g.nodes[v].kind, rules, rng)
        edges.append(Edge(u, v, label, t))
        t += 1
    return g.replace(edges=edges)


def gfpa_graph(g: ProvenanceGraph, rate: float, rng, policy: str = "malicious_nodes"):
    """Overwrite features of ``ceil(rate * |targets|)`` targets with a donor's.

    Donors are the non-target nodes, same kind preferred. Under the random
    policy the targets are sampled first and donors are the remaining nodes.
    """
    sources, _ = _targets(g, policy)
    count = perturb_count(rate, len(sources))
    if count == 0:
        return g
    picked = [sources[i] for i in np.sort(rng.choice(len(sources), count, replace=False))]
    if policy == "random":
        chosen = set(picked)
        donors_all = [n for n in g.sorted_ids() if n not in chosen]
    else:
        bad = set(sources)
        donors_all = [n for n in g.sorted_ids() if n not in bad]
    if not donors_all:
        return g
    nodes = dict(g.nodes)
    for v in picked:
        kind = g.nodes[v].kind
        same = [w for w in donors_all if g.nodes[w].kind == kind]
        pool = same or donors_all
        w = pool[rng.integers(len(pool))]
        nodes[v] = Node(kind, g.nodes[w].feature)
    return g.replace(nodes=nodes)


def _sub_rngs(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def gspa(g: ProvenanceGraph, spec: AttackSpec) -> ProvenanceGraph:
    return gspa_graph(g, spec.rate, np.random.default_rng(spec.seed), spec.target_policy)


def gfpa(g: ProvenanceGraph, spec: AttackSpec) -> ProvenanceGraph:
    return gfpa_graph(g, spec.rate, np.random.default_rng(spec.seed), spec.target_policy)


def cgpa(g: ProvenanceGraph, spec: AttackSpec) -> ProvenanceGraph:
    """Structure then features, each at half the rate with its own sub-seed."""
    r1, r2 = _sub_rngs(spec.seed, 2)
    half = 0.5 * spec.rate
    return gfpa_graph(gspa_graph(g, half, r1, spec.target_policy), half, r2, spec.target_policy)


def spa_graph(g: ProvenanceGraph, rate: float, rng, rules=DEFAULT_RULES):
    """Poison one graph's structure. Returns the graph and the list of operations."""
    ops = []
    n_node_ops = perturb_count(0.5 * rate, g.n_nodes)
    n_edge_ops = perturb_count(0.5 * rate, g.n_edges)
    nodes = dict(g.nodes)
    edges = list(g.edges)
    t = _next_time(g)
    kinds = list(NodeKind)
    counter = 0
    for _ in range(n_node_ops):
        kind = kinds[rng.integers(len(kinds))]
        while f"~spa{counter}" in nodes:
            counter += 1
        new = f"~spa{counter}"
        ids = sorted(nodes)
        fan = min(int(rng.integers(1, 4)), len(ids))
        nodes[new] = Node(kind, kind.value)
        for j in rng.choice(len(ids), fan, replace=False):
            w = ids[j]
            if rng.random() < 0.5:
                e = Edge(new, w, _legal_or_any(kind, nodes[w].kind, rules, rng), t)
            else:
                e = Edge(w, new, _legal_or_any(nodes[w].kind, kind, rules, rng), t)
            edges.append(e)
            t += 1
        ops.append(("insert_node", new))
    for _ in range(n_edge_ops):
        ids = sorted(nodes)
        if rng.random() < 0.5 or not edges:
            i, j = rng.choice(len(ids), 2, replace=False)
            u, v = ids[i], ids[j]
            edges.append(Edge(u, v, _legal_or_any(nodes[u].kind, nodes[v].kind, rules, rng), t))
            t += 1
            ops.append(("insert_edge", (u, v)))
        else:
            k = int(rng.integers(len(edges)))
            old = edges[k]
            choices = [n for n in ids if n not in (old.src, old.dst)]
            if not choices:
                continue
            v = choices[rng.integers(len(choices))]
            edges[k] = Edge(old.src, v, old.kind, old.t)
            ops.append(("rewire", (old.src, old.dst, v)))
    return cleanup(g.replace(nodes=nodes, edges=edges)), ops


def fpa_graph(g: ProvenanceGraph, rate: float, rng):
    """Swap features between disjoint random node pairs, ignoring kinds.

    Returns the graph and the swap list; applying the swaps again undoes them.
    """
    n = g.n_nodes
    count = perturb_count(rate, n)
    if count % 2:
        count = count + 1 if count + 1 <= n else count - 1
    if count < 2:
        return g, []
    ids = g.sorted_ids()
    chosen = [ids[i] for i in rng.permutation(n)[:count]]
    swaps = [(chosen[i], chosen[i + 1]) for i in range(0, count, 2)]
    return apply_swaps(g, swaps), swaps


def apply_swaps(g: ProvenanceGraph, swaps) -> ProvenanceGraph:
    nodes = dict(g.nodes)
    for a, b in swaps:
        fa, fb = nodes[a].feature, nodes[b].feature
        nodes[a] = Node(nodes[a].kind, fb)
        nodes[b] = Node(nodes[b].kind, fa)
    return g.replace(nodes=nodes)


def spa(train_graphs: Sequence[ProvenanceGraph], spec: AttackSpec) -> list[ProvenanceGraph]:
    return [
        spa_graph(g, spec.rate, np.random.default_rng(derive_seed(spec.seed, i)))[0]
        for i, g in enumerate(train_graphs)
    ]


def fpa(train_graphs: Sequence[ProvenanceGraph], spec: AttackSpec) -> list[ProvenanceGraph]:
    return [
        fpa_graph(g, spec.rate, np.random.default_rng(derive_seed(spec.seed, i)))[0]
        for i, g in enumerate(train_graphs)
    ]


_DETECTION_OPS = {"GSPA": gspa, "GFPA": gfpa, "CGPA": cgpa}
_TRAINING_OPS = {"SPA": spa, "FPA": fpa}


def apply_attack(data, spec: AttackSpec, phase: str | None = None):
    """Run ``spec`` on one graph or a sequence of graphs.

    Detection attacks on a sequence use a per-graph seed derived from
    ``spec.seed`` and the graph's position. Graphs without node-level
    ground truth are attacked under the random policy.
    """
    if phase is not None and phase != spec.phase:
        raise ConfigError(f"{spec.kind} is a {spec.phase}-phase attack, not {phase}")
    single = isinstance(data, ProvenanceGraph)
    graphs = [data] if single else list(data)
    if spec.rate == 0:
        return data if single else graphs
    if spec.kind in _TRAINING_OPS:
        out = _TRAINING_OPS[spec.kind](graphs, spec)
        return out[0] if single else out
    op = _DETECTION_OPS[spec.kind]
    out = []
    for i, g in enumerate(graphs):
        s = spec if single else replace(spec, seed=derive_seed(spec.seed, i))
        if s.target_policy == "malicious_nodes" and not g.malicious_nodes():
            if isinstance(g.ground_truth, Mapping):
                # node-labelled graph with nothing for the attacker to hide
                out.append(g)
                continue
            s = replace(s, target_policy="random")
        out.append(op(g, s))
    return out[0] if single else out
