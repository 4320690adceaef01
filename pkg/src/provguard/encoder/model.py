from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..graph import ProvenanceGraph
from . import gat
from .loss import contrastive_loss
from .vocab import FeatureVocab, encode_features

PARAM_NAMES = ("W0", "b0", "a0", "W1", "b1", "a1", "Wp1", "bp1", "Wp2", "bp2")


@dataclass
class EncoderModel:
    """Two attention layers, mean readout and a two-layer projection head.

    ``params`` uses row-vector convention: ``W0`` is ``in x hidden``,
    ``W1`` is ``hidden(+edge kinds) x out_dim``, the projection matrices are
    ``out_dim x out_dim``. ``a0``/``a1`` hold the destination half of the
    attention vector followed by the source half.
    """

    vocab: FeatureVocab
    params: dict[str, np.ndarray]
    hidden_dim: int = 128
    out_dim: int = 64
    use_edge_features: bool = True
    config: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    @classmethod
    def initialize(
        cls,
        vocab: FeatureVocab,
        hidden_dim: int = 128,
        out_dim: int = 64,
        use_edge_features: bool = True,
        seed: int = 0,
    ) -> EncoderModel:
        if hidden_dim <= 0 or out_dim <= 0:
            raise ValueError("layer widths must be positive")
        rng = np.random.default_rng(seed)
        extra = vocab.n_edge if use_edge_features else 0

        def uniform(rows, cols=None):
            bound = 1.0 / np.sqrt(rows)
            shape = (rows,) if cols is None else (rows, cols)
            return rng.uniform(-bound, bound, size=shape)

        params = {
            "W0": uniform(vocab.n_node + extra, hidden_dim),
            "b0": np.zeros(hidden_dim),
            "a0": uniform(2 * hidden_dim),
            "W1": uniform(hidden_dim + extra, out_dim),
            "b1": np.zeros(out_dim),
            "a1": uniform(2 * out_dim),
            "Wp1": uniform(out_dim, out_dim),
            "bp1": np.zeros(out_dim),
            "Wp2": uniform(out_dim, out_dim),
            "bp2": np.zeros(out_dim),
        }
        return cls(vocab, params, hidden_dim, out_dim, use_edge_features)

    def copy(self) -> EncoderModel:
        return EncoderModel(
            self.vocab,
            {k: v.copy() for k, v in self.params.items()},
            self.hidden_dim,
            self.out_dim,
            self.use_edge_features,
            dict(self.config),
            list(self.loss_history),
        )

    @property
    def d(self) -> int:
        return self.out_dim


def _encode(model: EncoderModel, batch: gat.GraphBatch):
    p = model.params
    ue = model.use_edge_features
    H1, c0 = gat.layer_forward(batch.X, p["W0"], p["b0"], p["a0"], batch, model.vocab.n_node, ue)
    Z, c1 = gat.layer_forward(H1, p["W1"], p["b1"], p["a1"], batch, model.hidden_dim, ue)
    return Z, (c0, c1)


def forward_batch(model: EncoderModel, batch: gat.GraphBatch) -> tuple[np.ndarray, np.ndarray]:
    """Node embeddings for the whole batch and one mean-pooled row per graph."""
    Z, _ = _encode(model, batch)
    return Z, gat.mean_readout(Z, batch)


def forward(model: EncoderModel, g: ProvenanceGraph, X: np.ndarray | None = None):
    """Node embedding matrix (sorted node ids) and graph embedding of one graph."""
    batch = gat.build_batch([g], model.vocab, None if X is None else [X])
    Z, z = forward_batch(model, batch)
    return Z, z[0]


def _project(params, z):
    pre = z @ params["Wp1"] + params["bp1"]
    h = np.maximum(pre, 0.0)
    return h @ params["Wp2"] + params["bp2"], (pre, h)


def project(model: EncoderModel, z: np.ndarray) -> np.ndarray:
    return _project(model.params, np.asarray(z, dtype=float))[0]


def objective(model: EncoderModel, batch: gat.GraphBatch, tau: float, partner=None):
    """Contrastive loss of a batch of views and gradients for every parameter."""
    p = model.params
    ue = model.use_edge_features
    Z, (c0, c1) = _encode(model, batch)
    zg = gat.mean_readout(Z, batch)
    proj, (pre, h) = _project(p, zg)
    loss, dproj = contrastive_loss(proj, tau, partner)

    grads = {"Wp2": h.T @ dproj, "bp2": dproj.sum(axis=0)}
    dpre = (dproj @ p["Wp2"].T) * (pre > 0)
    grads["Wp1"] = zg.T @ dpre
    grads["bp1"] = dpre.sum(axis=0)
    dzg = dpre @ p["Wp1"].T
    dZ = gat.mean_readout_backward(dzg, batch)
    dH1, grads["W1"], grads["b1"], grads["a1"] = gat.layer_backward(dZ, c1, p["W1"], p["a1"], batch, model.hidden_dim, ue)
    _, grads["W0"], grads["b0"], grads["a0"] = gat.layer_backward(dH1, c0, p["W0"], p["a0"], batch, model.vocab.n_node, ue)
    return loss, grads


def embed(model: EncoderModel, g: ProvenanceGraph, level: str = "graph") -> np.ndarray:
    """Node-level: ``|V| x d`` rows in sorted id order. Graph-level: one ``d`` vector."""
    Z, z = forward(model, g)
    if level == "node":
        return Z
    if level == "graph":
        return z
    raise ValueError(f"level must be 'node' or 'graph', got {level!r}")


def embed_many(
    model: EncoderModel, graphs: Sequence[ProvenanceGraph], level: str = "graph", chunk: int = 256
) -> np.ndarray:
    """Stacked embeddings of many graphs, computed in batches.

    Graph level returns ``len(graphs) x d``; node level stacks every graph's
    node rows in input order.
    """
    if level not in ("node", "graph"):
        raise ValueError(f"level must be 'node' or 'graph', got {level!r}")
    out = []
    for i in range(0, len(graphs), chunk):
        batch = gat.build_batch(graphs[i : i + chunk], model.vocab)
        Z, z = forward_batch(model, batch)
        out.append(Z if level == "node" else z)
    if not out:
        return np.zeros((0, model.out_dim))
    return np.vstack(out)


__all__ = [
    "EncoderModel",
    "PARAM_NAMES",
    "embed",
    "embed_many",
    "encode_features",
    "forward",
    "forward_batch",
    "objective",
    "project",
]
