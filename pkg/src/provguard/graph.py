"""Provenance graph construction from audit event records.

Records are parsed from a line-delimited format, assembled into a typed
multigraph, compressed by dropping repeated edges inside a time window and
stripped of orphan nodes.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import GraphError

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_NS = 10**9

DEFAULT_EDGE_KINDS = (
    "read",
    "write",
    "connect",
    "send",
    "recv",
    "exec",
    "load",
    "fork",
    "clone",
)


class NodeKind(str, Enum):
    PROCESS = "Process"
    FILE = "File"
    NETWORK = "Network"

    def __str__(self) -> str:
        return self.value


NODE_KINDS = tuple(NodeKind)


def as_node_kind(value) -> NodeKind:
    if isinstance(value, NodeKind):
        return value
    try:
        return NodeKind(value)
    except ValueError:
        raise GraphError(f"unknown node kind {value!r}") from None


class Node(NamedTuple):
    kind: NodeKind
    # Label whose one-hot vector is this node's input feature: the kind name
    # or a finer "Kind/subtype" label. Augmentations and attacks rewrite it.
    feature: str


def base_kind(label: str) -> str:
    """Kind part of a feature label, e.g. ``"File"`` for ``"File/binary"``."""
    return label.split("/", 1)[0]


class Edge(NamedTuple):
    src: str
    dst: str
    kind: str
    t: int


@dataclass(frozen=True)
class EventRecord:
    src_id: str
    src_kind: NodeKind
    dst_id: str
    dst_kind: NodeKind
    edge_kind: str
    timestamp: int
    src_feature: str | None = None
    dst_feature: str | None = None

    def __post_init__(self):
        if not self.src_id or not self.dst_id:
            raise GraphError("event endpoints must be non-empty identifiers")
        if self.timestamp < 0:
            raise GraphError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class ProvenanceGraph:
    """Typed, timestamped multigraph of system entities.

    ``ground_truth`` is either a mapping ``node id -> is_malicious`` for
    node-level data, a single bool for graph-level data, or ``None``.
    Instances are treated as immutable; every transform returns a new graph.
    """

    nodes: Mapping[str, Node]
    edges: tuple[Edge, ...]
    ground_truth: Mapping[str, bool] | bool | None = None
    _degree: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise GraphError(f"edge {e} references a missing node")
            if e.src == e.dst:
                raise GraphError(f"self-loop on {e.src}")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self) -> dict[str, int]:
        if self._degree is None:
            deg = dict.fromkeys(self.nodes, 0)
            for e in self.edges:
                deg[e.src] += 1
                deg[e.dst] += 1
            object.__setattr__(self, "_degree", deg)
        return dict(self._degree)

    def sorted_ids(self) -> list[str]:
        return sorted(self.nodes)

    def malicious_nodes(self) -> list[str]:
        if not isinstance(self.ground_truth, Mapping):
            return []
        return sorted(n for n, bad in self.ground_truth.items() if bad and n in self.nodes)

    @property
    def is_malicious(self) -> bool | None:
        """Graph-level flag; derived from node labels when only those exist."""
        if isinstance(self.ground_truth, bool):
            return self.ground_truth
        if isinstance(self.ground_truth, Mapping):
            return bool(self.malicious_nodes())
        return None

    def replace(self, nodes=None, edges=None, ground_truth=...) -> ProvenanceGraph:
        """Copy with some parts swapped out; per-node labels follow surviving nodes."""
        nodes = dict(self.nodes) if nodes is None else nodes
        edges = self.edges if edges is None else edges
        gt = self.ground_truth if ground_truth is ... else ground_truth
        if isinstance(gt, Mapping):
            gt = {n: v for n, v in gt.items() if n in nodes}
        return ProvenanceGraph(nodes, tuple(edges), gt)


@dataclass
class ParseReport:
    accepted: int = 0
    rejected: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, lineno: int, message: str) -> None:
        self.rejected += 1
        self.errors.append((lineno, message))
        logger.debug("line %d rejected: %s", lineno, message)


_CSV_COLUMNS = ("src", "sk", "dst", "dk", "e", "t")


def _record_from_fields(obj: Mapping, edge_kinds) -> EventRecord:
    try:
        src, dst, label = obj["src"], obj["dst"], obj["e"]
        sk, dk, t = obj["sk"], obj["dk"], obj["t"]
    except KeyError as exc:
        raise GraphError(f"missing key {exc.args[0]!r}") from None
    if not isinstance(src, str) or not isinstance(dst, str):
        raise GraphError("src and dst must be strings")
    if label not in edge_kinds:
        raise GraphError(f"unknown edge label {label!r}")
    if isinstance(t, bool) or not isinstance(t, int):
        try:
            t = int(t)
        except (TypeError, ValueError):
            raise GraphError(f"timestamp {t!r} is not an integer") from None
    if src == dst:
        raise GraphError(f"self-loop on {src}")
    sf = obj.get("sl")
    df = obj.get("dl")
    for lab in (sf, df):
        if lab is not None and (not isinstance(lab, str) or not lab):
            raise GraphError(f"invalid node label {lab!r}")
    return EventRecord(src, as_node_kind(sk), dst, as_node_kind(dk), label, t, sf, df)


def parse_events(
    stream: Iterable[str],
    fmt: str = "jsonl",
    edge_kinds: Sequence[str] = DEFAULT_EDGE_KINDS,
) -> tuple[list[EventRecord], ParseReport]:
    """Parse serialized events, one per line.

    Blank lines and lines starting with ``#`` are headers, not records.
    Malformed lines are counted in the report and skipped.
    """
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unsupported format {fmt!r}")
    kinds = frozenset(edge_kinds)
    report = ParseReport()
    records: list[EventRecord] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if fmt == "jsonl":
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    raise GraphError("not valid JSON") from None
                if not isinstance(obj, dict):
                    raise GraphError("record is not an object")
            else:
                row = next(csv.reader([line]))
                if tuple(c.strip() for c in row) == _CSV_COLUMNS:
                    continue
                if len(row) != 6:
                    raise GraphError(f"expected 6 columns, got {len(row)}")
                obj = dict(zip(_CSV_COLUMNS, (c.strip() for c in row)))
            rec = _record_from_fields(obj, kinds)
        except GraphError as exc:
            report.reject(lineno, str(exc))
            continue
        records.append(rec)
        report.accepted += 1
    return records, report


def build_graph(
    events: Sequence[EventRecord],
    ground_truth: Mapping[str, bool] | bool | None = None,
) -> ProvenanceGraph:
    if not events:
        raise GraphError("cannot build a graph from zero events")
    nodes: dict[str, Node] = {}
    labelled: set[str] = set()

    def add(node_id, kind, feature):
        seen = nodes.get(node_id)
        if seen is not None and seen.kind != kind:
            raise GraphError(f"conflicting kind for {node_id}")
        if feature is None:
            if seen is None:
                nodes[node_id] = Node(kind, kind.value)
            return
        feature = str(feature)
        if node_id in labelled and seen.feature != feature:
            raise GraphError(f"conflicting feature for {node_id}")
        nodes[node_id] = Node(kind, feature)
        labelled.add(node_id)

    edges = []
    for ev in events:
        if ev.src_id == ev.dst_id:
            raise GraphError(f"self-loop on {ev.src_id}")
        add(ev.src_id, ev.src_kind, ev.src_feature)
        add(ev.dst_id, ev.dst_kind, ev.dst_feature)
        edges.append(Edge(ev.src_id, ev.dst_id, ev.edge_kind, ev.timestamp))
    if isinstance(ground_truth, Mapping):
        ground_truth = {n: bool(v) for n, v in ground_truth.items() if n in nodes}
    return ProvenanceGraph(nodes, tuple(edges), ground_truth)


def reduce_cpr(g: ProvenanceGraph, window: int = DEFAULT_WINDOW_NS) -> ProvenanceGraph:
    """Drop repeated ``(src, dst, kind)`` edges inside a time window.

    Within each group the earliest edge of a burst is kept and every later
    edge closer than ``window`` ns to it is dropped; the next surviving edge
    opens a new burst.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    groups = defaultdict(list)
    for i, e in enumerate(g.edges):
        groups[(e.src, e.dst, e.kind)].append(i)
    keep = set()
    for idx in groups.values():
        idx.sort(key=lambda i: (g.edges[i].t, i))
        rep_t = None
        for i in idx:
            t = g.edges[i].t
            if rep_t is None or t - rep_t >= window:
                keep.add(i)
                rep_t = t
    if len(keep) == len(g.edges):
        return g
    return g.replace(edges=[e for i, e in enumerate(g.edges) if i in keep])


def cleanup(g: ProvenanceGraph) -> ProvenanceGraph:
    """Remove nodes without incident edges."""
    used = set()
    for e in g.edges:
        used.add(e.src)
        used.add(e.dst)
    if len(used) == len(g.nodes):
        return g
    return g.replace(nodes={n: v for n, v in g.nodes.items() if n in used})


def batch_split(
    events: Sequence[EventRecord],
    batch_size: int,
    window: int = DEFAULT_WINDOW_NS,
    ground_truth: Mapping[str, bool] | None = None,
) -> list[ProvenanceGraph]:
    """Cut an event stream into consecutive windows of ``batch_size`` events."""
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    return [
        cleanup(reduce_cpr(build_graph(events[i : i + batch_size], ground_truth), window))
        for i in range(0, len(events), batch_size)
    ]


def dump_graph(g: ProvenanceGraph) -> str:
    """Deterministic text form: sorted nodes then sorted edges."""
    lines = [f"node\t{n}\t{g.nodes[n].kind}\t{g.nodes[n].feature}" for n in sorted(g.nodes)]
    lines += [f"edge\t{e.src}\t{e.dst}\t{e.kind}\t{e.t}" for e in sorted(g.edges)]
    return "\n".join(lines) + "\n"


def topology_key(g: ProvenanceGraph) -> tuple:
    """Hashable summary of nodes, kinds and edges, ignoring features."""
    return (
        tuple(sorted((n, str(v.kind)) for n, v in g.nodes.items())),
        tuple(sorted(g.edges)),
    )


class GraphBuilder(TransformerMixin, BaseEstimator):
    """Turn event records into cleaned provenance graphs.

    With ``batch_size=None`` the whole input becomes one graph.
    """

    def __init__(self, window: int = DEFAULT_WINDOW_NS, batch_size: int | None = None):
        self.window = window
        self.batch_size = batch_size

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        events = list(X)
        if not events:
            return []
        if self.batch_size is None:
            return [cleanup(reduce_cpr(build_graph(events), self.window))]
        return batch_split(events, self.batch_size, self.window)
