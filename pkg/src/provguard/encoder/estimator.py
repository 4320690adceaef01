"""Estimator wrapper: fit trains the encoder, transform embeds graphs."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..augmentation import AUGMENTATION_KINDS, AugmentationPlan
from .model import embed_many
from .train import TrainConfig, train


class ContrastiveEncoder(TransformerMixin, BaseEstimator):
    """Contrastively trained graph encoder.

    ``fit`` takes a list of benign graphs; ``transform`` returns one row per
    graph (``level="graph"``) or one row per node in sorted id order,
    stacked over graphs (``level="node"``).
    """

    def __init__(
        self,
        aug_kinds: Sequence[str] = AUGMENTATION_KINDS,
        gamma: float = 0.5,
        learning_rate: float = 0.001,
        temperature: float = 0.5,
        epochs: int = 20,
        batch_size: int = 50,
        hidden_dim: int = 128,
        out_dim: int = 64,
        optimizer: str = "adam",
        use_edge_features: bool = True,
        level: str = "graph",
        seed: int = 0,
    ):
        self.aug_kinds = aug_kinds
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.temperature = temperature
        self.epochs = epochs
        self.batch_size = batch_size
        self.hidden_dim = hidden_dim
        self.out_dim = out_dim
        self.optimizer = optimizer
        self.use_edge_features = use_edge_features
        self.level = level
        self.seed = seed

    def fit(self, X, y=None):
        plan = AugmentationPlan(frozenset(self.aug_kinds), self.gamma, self.seed)
        cfg = TrainConfig(
            self.learning_rate,
            self.temperature,
            self.epochs,
            self.batch_size,
            self.seed,
            self.optimizer,
            self.hidden_dim,
            self.out_dim,
            self.use_edge_features,
        )
        self.model_ = train(list(X), plan, cfg)
        self.loss_history_ = list(self.model_.loss_history)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return embed_many(self.model_, list(X), self.level)
