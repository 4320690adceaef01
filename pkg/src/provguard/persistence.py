"""Versioned model artifact: encoder weights, vocabulary, centroid model, config echo.

The artifact is a single JSON document. Floats are written with ``repr``
precision, so a save/load round trip reproduces every weight bit for bit,
and keys are sorted so identical models serialize to identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detector import CentroidModel
from .encoder.model import PARAM_NAMES, EncoderModel
from .encoder.vocab import FeatureVocab
from .exceptions import DataError

ARTIFACT_FORMAT = "provguard-model"
ARTIFACT_VERSION = 1


@dataclass
class Artifact:
    encoder: EncoderModel
    detector: CentroidModel
    meta: dict = field(default_factory=dict)


def _tensor(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": [float(x) for x in a.ravel()]}


def _array(d: dict) -> np.ndarray:
    return np.asarray(d["data"], dtype=np.float64).reshape(d["shape"])


def artifact_to_dict(art: Artifact) -> dict:
    enc, det = art.encoder, art.detector
    return {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "vocab": enc.vocab.to_dict(),
        "encoder": {
            "hidden_dim": enc.hidden_dim,
            "out_dim": enc.out_dim,
            "use_edge_features": enc.use_edge_features,
            "config": enc.config,
            "loss_history": [float(x) for x in enc.loss_history],
            "params": {k: _tensor(enc.params[k]) for k in PARAM_NAMES},
        },
        "detector": {
            "centroids": _tensor(det.centroids),
            "d_mean": float(det.d_mean),
            "theta": float(det.theta),
            "train_distances": _tensor(det.train_distances) if det.train_distances is not None else None,
            "wcss_history": [float(x) for x in det.wcss_history],
        },
        "meta": art.meta,
    }


def artifact_from_dict(d: dict) -> Artifact:
    if d.get("format") != ARTIFACT_FORMAT:
        raise DataError("not a model artifact")
    if d.get("version") != ARTIFACT_VERSION:
        raise DataError(f"unsupported artifact version {d.get('version')!r}")
    e = d["encoder"]
    params = {k: _array(e["params"][k]) for k in PARAM_NAMES}
    encoder = EncoderModel(
        FeatureVocab.from_dict(d["vocab"]),
        params,
        e["hidden_dim"],
        e["out_dim"],
        e["use_edge_features"],
        e.get("config", {}),
        list(e.get("loss_history", [])),
    )
    k = d["detector"]
    dist = k.get("train_distances")
    detector = CentroidModel(
        _array(k["centroids"]),
        float(k["d_mean"]),
        float(k["theta"]),
        None if dist is None else _array(dist),
        list(k.get("wcss_history", [])),
    )
    return Artifact(encoder, detector, d.get("meta", {}))


def dumps_artifact(art: Artifact) -> str:
    return json.dumps(artifact_to_dict(art), sort_keys=True, separators=(",", ":")) + "\n"


def save_artifact(art: Artifact, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_artifact(art), encoding="utf-8")
    return path


def load_artifact(path) -> Artifact:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read model artifact {path}: {exc}") from None
    try:
        return artifact_from_dict(json.loads(text))
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"corrupt model artifact {path}: {exc}") from None
