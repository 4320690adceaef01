"""Single-head graph attention layers with hand-written backward passes.

A batch is the disjoint union of several graphs. Every node gets an extra
self edge, edges are sorted by destination so per-node segments are
contiguous, and messages carry the one-hot of their edge label (zero on
self edges) next to the source node state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..graph import ProvenanceGraph
from .vocab import FeatureVocab, encode_features

LEAKY_SLOPE = 0.2


@dataclass
class GraphBatch:
    X: np.ndarray  # (n, n_node_kinds) one-hot input
    src: np.ndarray  # (m,) edges incl. self edges, sorted by dst
    dst: np.ndarray
    edge_kind: np.ndarray  # (m,) vocab index, -1 on self edges
    dst_start: np.ndarray  # (n,) first edge of each destination segment
    graph_start: np.ndarray  # (G,) first node of each graph
    graph_size: np.ndarray  # (G,)
    src_matrix: sp.csr_matrix  # (n, m), scatter-add of edge rows onto sources

    @property
    def n_graphs(self) -> int:
        return len(self.graph_start)

    @property
    def n_nodes(self) -> int:
        return self.X.shape[0]


def build_batch(
    graphs: Sequence[ProvenanceGraph],
    vocab: FeatureVocab,
    features: Sequence[np.ndarray] | None = None,
) -> GraphBatch:
    xs, srcs, dsts, kinds, sizes = [], [], [], [], []
    offset = 0
    for gi, g in enumerate(graphs):
        ids = g.sorted_ids()
        pos = {n: i for i, n in enumerate(ids)}
        n = len(ids)
        xs.append(encode_features(g, vocab) if features is None else np.asarray(features[gi], float))
        s = [pos[e.src] for e in g.edges] + list(range(n))
        d = [pos[e.dst] for e in g.edges] + list(range(n))
        k = [vocab.edge_index(e.kind) for e in g.edges] + [-1] * n
        srcs.append(np.asarray(s, dtype=np.int64) + offset)
        dsts.append(np.asarray(d, dtype=np.int64) + offset)
        kinds.append(np.asarray(k, dtype=np.int64))
        sizes.append(n)
        offset += n
    src = np.concatenate(srcs)
    dst = np.concatenate(dsts)
    kind = np.concatenate(kinds)
    order = np.argsort(dst, kind="stable")
    src, dst, kind = src[order], dst[order], kind[order]
    n_total = offset
    counts = np.bincount(dst, minlength=n_total)
    dst_start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    sizes = np.asarray(sizes, dtype=np.int64)
    graph_start = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    m = len(src)
    src_matrix = sp.csr_matrix((np.ones(m), (src, np.arange(m))), shape=(n_total, m))
    return GraphBatch(
        X=np.vstack(xs) if xs else np.zeros((0, vocab.n_node)),
        src=src,
        dst=dst,
        edge_kind=kind,
        dst_start=dst_start,
        graph_start=graph_start,
        graph_size=sizes,
        src_matrix=src_matrix,
    )


def _seg_sum(values: np.ndarray, starts: np.ndarray) -> np.ndarray:
    return np.add.reduceat(values, starts, axis=0)


def layer_forward(H, W, b, a, batch: GraphBatch, n_in: int, use_edges: bool):
    """One attention layer. ``W`` stacks the node block over the edge block."""
    Wh = W[:n_in]
    HW = H @ Wh
    P = HW[batch.src]
    if use_edges:
        real = batch.edge_kind >= 0
        P[real] += W[n_in:][batch.edge_kind[real]]
    o = W.shape[1]
    a_dst, a_src = a[:o], a[o:]
    raw = (HW @ a_dst)[batch.dst] + P @ a_src
    score = np.where(raw > 0, raw, LEAKY_SLOPE * raw)
    mx = np.maximum.reduceat(score, batch.dst_start)
    ex = np.exp(score - mx[batch.dst])
    alpha = ex / _seg_sum(ex, batch.dst_start)[batch.dst]
    agg = _seg_sum(alpha[:, None] * P, batch.dst_start)
    pre = agg + b
    out = np.maximum(pre, 0.0)
    cache = (H, HW, P, raw, alpha, pre)
    return out, cache


def layer_backward(dout, cache, W, a, batch: GraphBatch, n_in: int, use_edges: bool):
    H, HW, P, raw, alpha, pre = cache
    o = W.shape[1]
    a_dst, a_src = a[:o], a[o:]
    dpre = dout * (pre > 0)
    db = dpre.sum(axis=0)
    dagg_e = dpre[batch.dst]
    dP = alpha[:, None] * dagg_e
    dalpha = np.einsum("ij,ij->i", P, dagg_e)
    wsum = _seg_sum(alpha * dalpha, batch.dst_start)
    dscore = alpha * (dalpha - wsum[batch.dst])
    draw = dscore * np.where(raw > 0, 1.0, LEAKY_SLOPE)
    da_src = draw @ P
    dP += draw[:, None] * a_src
    ds_dst = _seg_sum(draw, batch.dst_start)
    da_dst = ds_dst @ HW
    dHW = batch.src_matrix @ dP + ds_dst[:, None] * a_dst
    dW = np.zeros_like(W)
    dW[:n_in] = H.T @ dHW
    if use_edges:
        real = batch.edge_kind >= 0
        np.add.at(dW[n_in:], batch.edge_kind[real], dP[real])
    dH = dHW @ W[:n_in].T
    da = np.concatenate([da_dst, da_src])
    return dH, dW, db, da


def attention_weights(H, W, a, batch: GraphBatch, n_in: int, use_edges: bool) -> np.ndarray:
    """Per-edge attention coefficients of one layer (for inspection and tests)."""
    b = np.zeros(W.shape[1])
    _, cache = layer_forward(H, W, b, a, batch, n_in, use_edges)
    return cache[4]


def mean_readout(Z: np.ndarray, batch: GraphBatch) -> np.ndarray:
    return _seg_sum(Z, batch.graph_start) / batch.graph_size[:, None]


def mean_readout_backward(dz: np.ndarray, batch: GraphBatch) -> np.ndarray:
    return np.repeat(dz / batch.graph_size[:, None], batch.graph_size, axis=0)
