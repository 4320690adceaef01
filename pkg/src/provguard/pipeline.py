"""End-to-end runs behind the command line: generate, train, detect, attack, evaluate."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import io as dsio
from .adversary import AttackSpec, apply_attack
from .augmentation import AugmentationPlan
from .config import RunConfig
from .detector import CentroidAnomalyDetector, summarize
from .encoder.model import embed_many
from .encoder.train import TrainConfig, train
from .encoder.vocab import FeatureVocab
from .exceptions import DataError
from .metrics import REPORT_SCHEMA_VERSION, EvalReport, compare_reports, compute_metrics
from .persistence import Artifact
from .synthetic import graph_level_dataset, node_level_streams

logger = logging.getLogger(__name__)

# where a run reads and writes, not part of the model
_PATH_KEYS = ("data.path", "model.path", "report.dir")


def generate(cfg: RunConfig, out) -> Path:
    """Write a synthetic dataset for ``gen.profile``."""
    header = {"generator": cfg["gen.profile"], "seed": cfg.seed}
    if cfg["gen.profile"] == "graph_level":
        ds = graph_level_dataset(
            cfg["gen.benign"], cfg["gen.malicious"], cfg.seed, cfg["gen.train_fraction"], cfg["graph.window"]
        )
        return dsio.save_graph_dataset(out, ds.graphs, ds.train_idx, ds.test_idx, "graph", header, ds.raw_events)
    n_mal = cfg["gen.malicious"]
    n_benign = cfg["gen.benign"]
    n_train = max(2, int(round(cfg["gen.train_fraction"] * n_benign)))
    train_ev, test_ev, labels = node_level_streams(n_train, max(0, n_benign - n_train), n_mal, cfg.seed)
    return dsio.save_stream_dataset(out, train_ev, test_ev, labels, header)


def build_graphs(cfg: RunConfig, events_path, out, labels_path=None) -> dsio.Dataset:
    """Parse a raw event log into reduced graphs and write them as a dataset.

    With ``graph.batch_size > 0`` the log is cut into batch graphs, otherwise
    it becomes a single graph. All graphs land in the test split.
    """
    records, report = dsio.read_events(Path(events_path), cfg["data.format"], cfg.edge_kinds)
    if report.rejected:
        line, msg = report.errors[0]
        raise DataError(f"{events_path}: {report.rejected} malformed record(s), first at line {line}: {msg}")
    if not records:
        raise DataError(f"{events_path}: no events")
    labels = dsio.read_labels(Path(labels_path)) if labels_path else None
    if labels is not None:
        labels = {n: labels.get(n, False) for r in records for n in (r.src_id, r.dst_id)}
    graphs = dsio.split_events(records, cfg["graph.batch_size"], cfg["graph.window"], labels)
    idx = list(range(len(graphs)))
    level = "node" if labels is not None else "graph"
    dsio.save_graph_dataset(out, graphs, [], idx, level, {"source": Path(events_path).name})
    return dsio.Dataset(level, graphs, [], idx)


def load(cfg: RunConfig, path=None) -> dsio.Dataset:
    return dsio.load_dataset(
        cfg["data.path"] if path is None else path,
        cfg["graph.window"],
        cfg["graph.batch_size"],
        cfg["data.format"],
        cfg.edge_kinds,
    )


def resolve_level(cfg: RunConfig, data: dsio.Dataset) -> str:
    return data.level if cfg["detect.level"] == "auto" else cfg["detect.level"]


def augmentation_plan(cfg: RunConfig) -> AugmentationPlan:
    return AugmentationPlan(frozenset(cfg.aug_kinds), cfg["aug.gamma"], cfg.aug_seed)


def train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg["encoder.lr"],
        temperature=cfg["encoder.tau"],
        epochs=cfg["encoder.epochs"],
        batch_size=cfg["encoder.batch_size"],
        seed=cfg.seed,
        optimizer=cfg["encoder.optimizer"],
        hidden_dim=cfg["encoder.hidden"],
        out_dim=cfg["encoder.d"],
        use_edge_features=cfg["encoder.edge_features"],
    )


def fit_artifact(cfg: RunConfig, train_graphs: Sequence, level: str) -> Artifact:
    """Train the encoder on benign graphs, then fit and calibrate the detector."""
    train_graphs = list(train_graphs)
    if len(train_graphs) < 2:
        raise DataError("training needs at least two benign graphs")
    flagged = sum(1 for g in train_graphs if g.is_malicious)
    if flagged:
        logger.warning("%d training graph(s) carry malicious ground truth", flagged)
    vocab = FeatureVocab.from_graphs(train_graphs, cfg.edge_kinds)
    encoder = train(train_graphs, augmentation_plan(cfg), train_config(cfg), vocab)
    emb = embed_many(encoder, train_graphs, level)
    theta = cfg["detector.theta"] or None
    det = CentroidAnomalyDetector(
        n_clusters=cfg["detector.k"],
        threshold_quantile=cfg["detector.quantile"],
        theta=theta,
        validation_fraction=0.0 if theta else cfg["detector.val_fraction"],
        random_state=cfg.seed,
    ).fit(emb)
    echo = {k: v for k, v in cfg.values.items() if k not in _PATH_KEYS}
    meta = {"level": level, "n_train_graphs": len(train_graphs), "config": echo}
    return Artifact(encoder, det.model_, meta)


def train_from_dataset(cfg: RunConfig, data: dsio.Dataset) -> Artifact:
    level = resolve_level(cfg, data)
    return fit_artifact(cfg, [data.graphs[i] for i in data.train_idx], level)


@dataclass
class Detection:
    level: str
    records: list[dict]
    summary: dict
    report: EvalReport | None = None
    labels: np.ndarray | None = field(default=None, repr=False)
    scores: np.ndarray | None = field(default=None, repr=False)


def _entity_labels(graphs, level: str, names=None):
    """Per-entity ids and ground truth (``None`` when any is missing)."""
    names = range(len(graphs)) if names is None else names
    ids, labels = [], []
    for gi, g in zip(names, graphs):
        if level == "graph":
            ids.append(str(gi))
            labels.append(g.is_malicious)
        else:
            gt = g.ground_truth if isinstance(g.ground_truth, Mapping) else {}
            for n in g.sorted_ids():
                ids.append(f"{gi}/{n}")
                labels.append(gt.get(n) if gt else None)
    if any(v is None for v in labels):
        return ids, None
    return ids, np.asarray(labels, dtype=bool)


def detect_graphs(art: Artifact, graphs: Sequence, level: str, names: Sequence | None = None, labels=None) -> Detection:
    """Score every entity; metrics are computed when ground truth is complete."""
    graphs = list(graphs)
    if not graphs:
        return Detection(level, [], {})
    ids, truth = _entity_labels(graphs, level, names)
    if labels is not None:
        truth = np.asarray(labels, dtype=bool)
    emb = embed_many(art.encoder, graphs, level)
    if emb.shape[1] != art.detector.d:
        raise DataError(f"embedding width {emb.shape[1]} does not match detector width {art.detector.d}")
    raw = art.detector.nearest_distance(emb)
    s = raw / art.detector.d_mean
    verdicts = s > art.detector.theta
    records = [
        {"id": i, "S": float(r), "S_norm": float(v), "verdict": "anomalous" if a else "benign"}
        for i, r, v, a in zip(ids, raw, s, verdicts)
    ]
    report = compute_metrics(verdicts, truth, s) if truth is not None else None
    return Detection(level, records, summarize(s), report, truth, s)


def detect_dataset(cfg: RunConfig, art: Artifact, data: dsio.Dataset) -> Detection:
    idx = data.subset(cfg["detect.subset"])
    level = resolve_level(cfg, data)
    trained = art.meta.get("level")
    if trained is not None and trained != level:
        logger.warning("model was fitted at %s level, scoring at %s level", trained, level)
    return detect_graphs(art, [data.graphs[i] for i in idx], level, names=idx)


def attack_spec(cfg: RunConfig, kind: str, rate: float) -> AttackSpec:
    return AttackSpec(kind, rate, cfg.seed, target_policy=cfg["eval.policy"])


def attack_dataset(data: dsio.Dataset, spec: AttackSpec) -> dsio.Dataset:
    """Detection attacks hit the test split, training attacks the training split."""
    graphs = list(data.graphs)
    idx = data.test_idx if spec.phase == "detection" else data.train_idx
    attacked = apply_attack([graphs[i] for i in idx], spec)
    for i, g in zip(idx, attacked):
        graphs[i] = g
    header = dict(data.header)
    header["attack"] = spec.describe()
    header["attack_phase"] = spec.phase
    return dsio.Dataset(data.level, graphs, list(data.train_idx), list(data.test_idx), header)


def save_attacked(data: dsio.Dataset, out) -> Path:
    return dsio.save_graph_dataset(out, data.graphs, data.train_idx, data.test_idx, data.level, data.header)


_ROW_METRICS = ("precision", "recall", "f1", "auc")


def _row(attack: str, rate: float, report: EvalReport, clean: EvalReport) -> dict:
    row = {"attack": attack, "rate": rate}
    for m in _ROW_METRICS + ("fpr", "accuracy"):
        row[m] = getattr(report, m)
    row["acr"] = compare_reports(clean, report, _ROW_METRICS)
    return row


def eval_robustness(cfg: RunConfig, art: Artifact, data: dsio.Dataset) -> list[dict]:
    """Clean row followed by one row per (attack, rate) in the configured grid.

    Training-phase attacks retrain on the poisoned training split before
    scoring the clean test split.
    """
    level = resolve_level(cfg, data)
    test = [data.graphs[i] for i in data.test_idx]
    clean = detect_graphs(art, test, level)
    if clean.report is None:
        raise DataError("robustness evaluation needs complete ground truth on the test split")
    rows = [_row("clean", 0.0, clean.report, clean.report)]
    for kind in cfg.eval_attacks:
        for rate in cfg.eval_rates:
            spec = attack_spec(cfg, kind, rate)
            if spec.phase == "detection":
                res = detect_graphs(art, apply_attack(test, spec), level, labels=clean.labels)
            else:
                poisoned = apply_attack([data.graphs[i] for i in data.train_idx], spec)
                res = detect_graphs(fit_artifact(cfg, poisoned, level), test, level, labels=clean.labels)
            rows.append(_row(kind, rate, res.report, clean.report))
            logger.info("%s y=%s auc=%s", kind, rate, res.report.auc)
    return rows


def export_embeddings(cfg: RunConfig, art: Artifact, data: dsio.Dataset):
    idx = data.subset(cfg["detect.subset"])
    level = resolve_level(cfg, data)
    graphs = [data.graphs[i] for i in idx]
    ids, _ = _entity_labels(graphs, level, idx)
    return ids, embed_many(art.encoder, graphs, level)


def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def format_table(rows: Sequence[dict], columns: Sequence[str]) -> str:
    cells = [[str(c) for c in columns]] + [[_fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(columns))]
    lines = ["  ".join(x.ljust(w) for x, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_detection(det: Detection, report_dir) -> Path:
    """``scores.jsonl``, ``metrics.json`` (when labelled) and ``summary.txt``."""
    root = Path(report_dir)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "scores.jsonl", "w", encoding="utf-8") as fh:
        for r in det.records:
            fh.write(_dumps(r) + "\n")
    body = {"schema_version": REPORT_SCHEMA_VERSION, "level": det.level, "summary": det.summary}
    if det.report is not None:
        body["metrics"] = det.report.to_dict()
    (root / "metrics.json").write_text(json.dumps(body, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    n_bad = sum(r["verdict"] == "anomalous" for r in det.records)
    lines = [f"level: {det.level}", f"entities: {len(det.records)}", f"anomalous: {n_bad}"]
    if det.report is not None:
        rep = det.report
        lines.append(
            format_table(
                [{k: getattr(rep, k) for k in ("precision", "recall", "f1", "accuracy", "fpr", "auc")}],
                ("precision", "recall", "f1", "accuracy", "fpr", "auc"),
            ).rstrip()
        )
        if rep.flags:
            lines.append("flags: " + ", ".join(rep.flags))
    (root / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root


def write_robustness(rows: Sequence[dict], report_dir) -> Path:
    root = Path(report_dir)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "robustness.jsonl", "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(_dumps({"schema_version": REPORT_SCHEMA_VERSION, **r}) + "\n")
    flat = [{**r, **{f"acr_{k}": v for k, v in r["acr"].items()}} for r in rows]
    cols = ("attack", "rate", "precision", "f1", "auc", "acr_precision", "acr_f1", "acr_auc")
    (root / "robustness.txt").write_text(format_table(flat, cols), encoding="utf-8")
    return root
