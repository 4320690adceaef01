from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .._utils import derive_seed
from ..augmentation import AugmentationPlan, make_views
from ..exceptions import NumericalError
from ..graph import ProvenanceGraph
from . import gat
from .model import EncoderModel, objective
from .vocab import FeatureVocab

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    temperature: float = 0.5
    epochs: int = 20
    batch_size: int = 50
    seed: int = 0
    optimizer: str = "adam"
    hidden_dim: int = 128
    out_dim: int = 64
    use_edge_features: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.epochs < 0 or self.batch_size < 2:
            raise ValueError("epochs must be >= 0 and batch_size >= 2")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


class _SGD:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for k, g in grads.items():
            params[k] -= self.lr * g


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    chunks = [order[i : i + size] for i in range(0, len(order), size)]
    # a lone trailing graph has no negatives of its own
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks


def view_batch(graphs, idx, plan: AugmentationPlan, vocab: FeatureVocab, seed: int, epoch: int):
    """Two views of every selected graph, laid out as [first views, second views]."""
    first, second = [], []
    for i in idx:
        a, b = make_views(graphs[i], plan.with_seed(derive_seed(plan.seed, seed, epoch, int(i))), 2)
        first.append(a)
        second.append(b)
    return gat.build_batch(first + second, vocab)


def train(
    graphs: Sequence[ProvenanceGraph],
    plan: AugmentationPlan,
    cfg: TrainConfig = TrainConfig(),
    vocab: FeatureVocab | None = None,
    model: EncoderModel | None = None,
) -> EncoderModel:
    """Contrastive training over augmented views.

    Returns a new model whose ``loss_history`` holds the mean batch loss of
    each epoch. Fully determined by ``cfg.seed`` and ``plan.seed``.
    """
    graphs = list(graphs)
    if len(graphs) < 2:
        raise ValueError("training needs at least two graphs")
    vocab = vocab or FeatureVocab.from_graphs(graphs)
    if model is None:
        model = EncoderModel.initialize(vocab, cfg.hidden_dim, cfg.out_dim, cfg.use_edge_features, cfg.seed)
    else:
        model = model.copy()
    model.config = {"train": asdict(cfg), "aug": {"kinds": sorted(plan.kinds), "gamma": plan.gamma, "seed": plan.seed}}
    opt = _Adam(model.params, cfg.learning_rate) if cfg.optimizer == "adam" else _SGD(model.params, cfg.learning_rate)
    rng = np.random.default_rng(derive_seed(cfg.seed, 0x5EED))
    history = []
    for epoch in range(cfg.epochs):
        losses = []
        for bi, idx in enumerate(_batches(rng.permutation(len(graphs)), cfg.batch_size)):
            batch = view_batch(graphs, idx, plan, vocab, cfg.seed, epoch)
            loss, grads = objective(model, batch, cfg.temperature)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericalError(f"non-finite loss {loss!r} at epoch {epoch}, batch {bi}")
            opt.step(model.params, grads)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        logger.info("epoch %d loss %.6f", epoch, history[-1])
    model.loss_history = history
    return model
