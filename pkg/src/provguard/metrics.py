"""Detection metrics with malicious as the positive class."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

REPORT_SCHEMA_VERSION = 1


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    accuracy: float
    fpr: float
    auc: float | None
    tp: int
    fp: int
    fn: int
    tn: int
    roc: list[tuple[float, float, float]] = field(default_factory=list, repr=False)
    flags: list[str] = field(default_factory=list)
    acr: dict[str, float | None] = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self, with_roc: bool = True) -> dict:
        d = asdict(self)
        if not with_roc:
            d.pop("roc")
        return d


def roc_curve_points(scores, labels) -> list[tuple[float, float, float]]:
    """``(threshold, fpr, tpr)`` for "score >= threshold", thresholds descending.

    Starts at ``(inf, 0, 0)`` and ends at ``(min score, 1, 1)``.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    points = [(float("inf"), 0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(s):
        j = i
        while j < len(s) and s[j] == s[i]:
            tp += int(y[j])
            fp += int(not y[j])
            j += 1
        points.append((float(s[i]), fp / n_neg if n_neg else 0.0, tp / n_pos if n_pos else 0.0))
        i = j
    return points


def roc_auc(scores, labels) -> float | None:
    """Trapezoidal area under the ROC; ``None`` when one class is absent."""
    y = np.asarray(labels, dtype=bool)
    if y.all() or not y.any():
        return None
    pts = roc_curve_points(scores, y)
    area = 0.0
    for (_, x0, y0), (_, x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def compute_metrics(verdicts, labels, scores=None) -> EvalReport:
    """Confusion-based metrics plus AUC over ``scores`` when given.

    Undefined ratios are reported as 0 and named in ``flags``.
    """
    v = np.asarray(verdicts, dtype=bool)
    y = np.asarray(labels, dtype=bool)
    if v.shape != y.shape:
        raise ValueError("verdicts and labels must align")
    tp = int(np.sum(v & y))
    fp = int(np.sum(v & ~y))
    fn = int(np.sum(~v & y))
    tn = int(np.sum(~v & ~y))
    flags = []

    def ratio(num, den, name):
        if den == 0:
            flags.append(f"{name}_undefined")
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp, "precision")
    recall = ratio(tp, tp + fn, "recall")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = ratio(tp + tn, len(y), "accuracy")
    fpr = ratio(fp, fp + tn, "fpr")
    auc, roc = None, []
    if scores is not None:
        auc = roc_auc(scores, y)
        if auc is None:
            flags.append("auc_undefined")
        else:
            roc = roc_curve_points(scores, y)
    return EvalReport(precision, recall, f1, accuracy, fpr, auc, tp, fp, fn, tn, roc, flags)


def acr(clean: float | None, attacked: float | None) -> float | None:
    """Relative absolute change ``|attacked - clean| / clean``."""
    if clean is None or attacked is None or clean == 0:
        return None
    return abs(attacked - clean) / clean


def compare_reports(clean: EvalReport, attacked: EvalReport, metrics=("precision", "recall", "f1", "auc")) -> dict:
    return {m: acr(getattr(clean, m), getattr(attacked, m)) for m in metrics}
