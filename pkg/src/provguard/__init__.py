"""Provenance-graph anomaly detection with logic-aware contrastive training.

Audit events become typed provenance graphs, a graph attention encoder is
trained contrastively on rule-respecting augmented views, and entities are
scored by their distance to k-means centroids of benign embeddings. Seeded
attack simulators perturb graphs to measure robustness.
"""

from .adversary import AttackSpec, apply_attack, parse_attack
from .augmentation import (
    DEFAULT_RULES,
    AugmentationPlan,
    LogicAwareAugmenter,
    LogicRuleSet,
    augment,
    augment_edges,
    augment_features,
    augment_nodes,
    make_views,
)
from .detector import CentroidAnomalyDetector, CentroidModel, calibrate_theta, score, score_batch
from .encoder import ContrastiveEncoder, EncoderModel, FeatureVocab, TrainConfig, contrastive_loss, embed, train
from .exceptions import ConfigError, DataError, GraphError, NumericalError, ProvGuardError
from .graph import (
    Edge,
    EventRecord,
    GraphBuilder,
    Node,
    NodeKind,
    ProvenanceGraph,
    batch_split,
    build_graph,
    cleanup,
    parse_events,
    reduce_cpr,
)
from .metrics import EvalReport, compute_metrics
from .persistence import Artifact, load_artifact, save_artifact

__version__ = "0.1.0"

__all__ = [
    "Artifact",
    "AttackSpec",
    "AugmentationPlan",
    "CentroidAnomalyDetector",
    "CentroidModel",
    "ConfigError",
    "ContrastiveEncoder",
    "DEFAULT_RULES",
    "DataError",
    "Edge",
    "EncoderModel",
    "EvalReport",
    "EventRecord",
    "FeatureVocab",
    "GraphBuilder",
    "GraphError",
    "LogicAwareAugmenter",
    "LogicRuleSet",
    "Node",
    "NodeKind",
    "NumericalError",
    "ProvGuardError",
    "ProvenanceGraph",
    "TrainConfig",
    "apply_attack",
    "augment",
    "augment_edges",
    "augment_features",
    "augment_nodes",
    "batch_split",
    "build_graph",
    "calibrate_theta",
    "cleanup",
    "compute_metrics",
    "contrastive_loss",
    "embed",
    "load_artifact",
    "make_views",
    "parse_attack",
    "parse_events",
    "reduce_cpr",
    "save_artifact",
    "score",
    "score_batch",
    "train",
]
