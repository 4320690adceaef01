from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError
from ..graph import DEFAULT_EDGE_KINDS, NODE_KINDS, ProvenanceGraph, base_kind


@dataclass(frozen=True)
class FeatureVocab:
    """Fixed ordering of node and edge categories for one-hot encoding.

    ``node_kinds`` lists node feature labels: the three kinds and optionally
    finer ``Kind/subtype`` labels.
    """

    node_kinds: tuple[str, ...] = tuple(str(k) for k in NODE_KINDS)
    edge_kinds: tuple[str, ...] = DEFAULT_EDGE_KINDS

    def __post_init__(self):
        object.__setattr__(self, "node_kinds", tuple(str(k) for k in self.node_kinds))
        object.__setattr__(self, "edge_kinds", tuple(self.edge_kinds))
        if len(set(self.node_kinds)) != len(self.node_kinds) or len(set(self.edge_kinds)) != len(self.edge_kinds):
            raise ValueError("vocabulary entries must be unique")
        object.__setattr__(self, "_node_pos", {k: i for i, k in enumerate(self.node_kinds)})

    @property
    def n_node(self) -> int:
        return len(self.node_kinds)

    @property
    def n_edge(self) -> int:
        return len(self.edge_kinds)

    def node_index(self, label) -> int:
        """Index of a node label; unseen ``Kind/subtype`` labels fall back to ``Kind``."""
        label = str(label)
        for cand in (label, base_kind(label)):
            if cand in self._node_pos:
                return self._node_pos[cand]
        raise DataError(f"node kind {label} not in vocabulary")

    @classmethod
    def from_graphs(cls, graphs, edge_kinds=DEFAULT_EDGE_KINDS) -> FeatureVocab:
        """Base kinds followed by every finer label seen in ``graphs``, sorted."""
        base = tuple(str(k) for k in NODE_KINDS)
        extra = sorted({n.feature for g in graphs for n in g.nodes.values()} - set(base))
        return cls(base + tuple(extra), tuple(edge_kinds))

    def edge_index(self, label: str) -> int:
        try:
            return self.edge_kinds.index(label)
        except ValueError:
            raise DataError(f"edge kind {label!r} not in vocabulary") from None

    def to_dict(self) -> dict:
        return {"node_kinds": list(self.node_kinds), "edge_kinds": list(self.edge_kinds)}

    @classmethod
    def from_dict(cls, d: dict) -> FeatureVocab:
        return cls(tuple(d["node_kinds"]), tuple(d["edge_kinds"]))


def encode_features(g: ProvenanceGraph, vocab: FeatureVocab) -> np.ndarray:
    """One-hot node features, rows in sorted node-id order."""
    for e in g.edges:
        vocab.edge_index(e.kind)
    ids = g.sorted_ids()
    X = np.zeros((len(ids), vocab.n_node))
    for row, n in enumerate(ids):
        X[row, vocab.node_index(g.nodes[n].feature)] = 1.0
    return X
