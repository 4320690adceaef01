"""Graph attention encoder, projection head and contrastive training."""

from .estimator import ContrastiveEncoder
from .loss import contrastive_loss
from .model import EncoderModel, embed, embed_many, forward, objective, project
from .train import TrainConfig, train
from .vocab import FeatureVocab, encode_features

__all__ = [
    "ContrastiveEncoder",
    "EncoderModel",
    "FeatureVocab",
    "TrainConfig",
    "contrastive_loss",
    "embed",
    "embed_many",
    "encode_features",
    "forward",
    "objective",
    "project",
    "train",
]
