"""Nearest-centroid anomaly scoring.

Benign embeddings are clustered with k-means; a point's raw score is its
Euclidean distance to the closest centroid, normalised by the mean of that
distance over the training set. Scores above ``theta`` are anomalous.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DataError

logger = logging.getLogger(__name__)


@dataclass
class CentroidModel:
    centroids: np.ndarray
    d_mean: float
    theta: float = 1.0
    train_distances: np.ndarray = field(default=None, repr=False)
    wcss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    def nearest_distance(self, X: np.ndarray) -> np.ndarray:
        return _min_dist(np.atleast_2d(X), self.centroids)


@dataclass(frozen=True)
class ScoredEntity:
    id: object
    raw_score: float
    score: float
    anomalous: bool

    @property
    def verdict(self) -> str:
        return "anomalous" if self.anomalous else "benign"


def _sq_dist(X, C):
    # exact rather than the expanded |x|^2 - 2xc + |c|^2 form, which loses zeros
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _min_dist(X, C):
    return np.sqrt(_sq_dist(X, C).min(axis=1))


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = _sq_dist(X, np.asarray(centers))[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise DataError("fewer distinct points than clusters")
        nxt = X[rng.choice(n, p=d2 / total)]
        centers.append(nxt)
        d2 = np.minimum(d2, ((X - nxt) ** 2).sum(axis=1))
    return np.array(centers)


def lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int = 300):
    """Lloyd iterations until the assignment stops changing.

    Returns centroids, assignment and the within-cluster sum of squares
    after every assignment step.
    """
    C = centroids.copy()
    k = C.shape[0]
    labels = None
    history = []
    for _ in range(max_iter):
        D = _sq_dist(X, C)
        new = D.argmin(axis=1)
        history.append(float(D[np.arange(len(X)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = labels == j
            if members.any():
                C[j] = X[members].mean(axis=0)
        empty = [j for j in range(k) if not np.any(labels == j)]
        if empty:
            own = ((X - C[labels]) ** 2).sum(axis=1)
            for j in empty:
                far = int(own.argmax())
                C[j] = X[far]
                own[far] = -1.0
    D = _sq_dist(X, C)
    labels = D.argmin(axis=1)
    return C, labels, history


def hartigan(X: np.ndarray, centroids: np.ndarray, labels: np.ndarray, max_sweeps: int = 100):
    """Single-point moves that strictly lower the within-cluster sum of squares.

    Starts from a Lloyd fixpoint and ends at one; catches partitions that
    Lloyd cannot leave because one point sits on the wrong side.
    """
    C = centroids.copy()
    labels = labels.copy()
    k = C.shape[0]
    counts = np.bincount(labels, minlength=k).astype(float)
    for _ in range(max_sweeps):
        moved = False
        for i in range(len(X)):
            a = labels[i]
            if counts[a] <= 1:
                continue
            d2 = ((C - X[i]) ** 2).sum(axis=1)
            remove = counts[a] / (counts[a] - 1) * d2[a]
            add = counts / (counts + 1) * d2
            add[a] = np.inf
            b = int(add.argmin())
            if add[b] < remove * (1 - 1e-12):
                C[a] = (C[a] * counts[a] - X[i]) / (counts[a] - 1)
                C[b] = (C[b] * counts[b] + X[i]) / (counts[b] + 1)
                counts[a] -= 1
                counts[b] += 1
                labels[i] = b
                moved = True
        if not moved:
            break
    for j in range(k):
        C[j] = X[labels == j].mean(axis=0)
    return C, labels


def wcss(X: np.ndarray, centroids: np.ndarray) -> float:
    return float(_sq_dist(X, centroids).min(axis=1).sum())


def fit(
    embeddings,
    k: int = 8,
    seed: int = 0,
    max_iter: int = 300,
    n_init: int = 10,
) -> CentroidModel:
    """k-means++ seeded Lloyd clustering of benign embeddings.

    Each of ``n_init`` initialisations runs Lloyd to a fixpoint and then
    :func:`hartigan` refinement; the lowest WCSS is kept.
    ``theta`` starts at 1.0; use :func:`calibrate_theta` to set it.
    """
    X = np.asarray(embeddings, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("embeddings must be a non-empty 2-D array")
    if k < 1:
        raise ValueError("k must be at least 1")
    if X.shape[0] < k:
        raise DataError(f"need at least k={k} points, got {X.shape[0]}")
    distinct = np.unique(X, axis=0).shape[0]
    if distinct < k:
        logger.warning("only %d distinct points; reducing k from %d", distinct, k)
        k = distinct
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        C, labels, hist = lloyd(X, _kmeans_pp(X, k, rng), max_iter)
        C, _ = hartigan(X, C, labels)
        score = wcss(X, C)
        hist = hist + [score]
        if best is None or score < best[0]:
            best = (score, C, hist)
    _, C, hist = best
    dist = _min_dist(X, C)
    d_mean = float(dist.mean())
    if d_mean <= 0:
        raise DataError("training embeddings coincide with their centroids; d_mean is zero")
    return CentroidModel(C, d_mean, 1.0, dist, hist)


def score(model: CentroidModel, x, entity_id=None) -> ScoredEntity:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d,):
        raise DataError(f"expected a {model.d}-vector, got shape {x.shape}")
    raw = float(model.nearest_distance(x)[0])
    s = raw / model.d_mean
    return ScoredEntity(entity_id, raw, s, s > model.theta)


def normalized_scores(model: CentroidModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.zeros(0)
    return model.nearest_distance(X) / model.d_mean


def summarize(scores: np.ndarray) -> dict:
    if len(scores) == 0:
        return {}
    q = np.quantile(scores, [0.25, 0.5, 0.75, 0.95, 0.99])
    return {
        "count": int(len(scores)),
        "min": float(scores.min()),
        "max": float(scores.max()),
        "mean": float(scores.mean()),
        "q25": float(q[0]),
        "q50": float(q[1]),
        "q75": float(q[2]),
        "q95": float(q[3]),
        "q99": float(q[4]),
    }


def score_batch(model: CentroidModel, X, ids: Sequence | None = None):
    """Score every row; returns the entities and a distribution summary."""
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return [], {}
    X = np.atleast_2d(X)
    if X.shape[1] != model.d:
        raise DataError(f"expected {model.d} columns, got {X.shape[1]}")
    ids = list(range(len(X))) if ids is None else list(ids)
    raw = model.nearest_distance(X)
    s = raw / model.d_mean
    out = [ScoredEntity(i, float(r), float(v), bool(v > model.theta)) for i, r, v in zip(ids, raw, s)]
    return out, summarize(s)


def calibrate_theta(model: CentroidModel, validation, target_quantile: float = 0.995) -> float:
    """Empirical ``target_quantile`` of validation scores, never below 1.0."""
    if not 0 < target_quantile <= 1:
        raise ValueError("target_quantile must lie in (0, 1]")
    s = normalized_scores(model, validation)
    if len(s) == 0:
        raise DataError("validation set is empty")
    return max(1.0, float(np.quantile(s, target_quantile, method="inverted_cdf")))


class CentroidAnomalyDetector(OutlierMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit` and :func:`calibrate_theta`.

    Follows the scikit-learn outlier convention: ``predict`` returns -1 for
    anomalies and 1 for normal points, ``score_samples`` is the negated
    normalised distance. ``anomaly_score`` gives the normalised distance itself.

    With ``validation_fraction > 0`` a random share of the training rows is
    held back from clustering and used only to calibrate the threshold.
    ``theta`` fixes the threshold and skips calibration.
    """

    def __init__(
        self,
        n_clusters: int = 8,
        threshold_quantile: float = 0.995,
        theta: float | None = None,
        validation_fraction: float = 0.0,
        max_iter: int = 300,
        n_init: int = 10,
        random_state: int = 0,
    ):
        self.n_clusters = n_clusters
        self.threshold_quantile = threshold_quantile
        self.theta = theta
        self.validation_fraction = validation_fraction
        self.max_iter = max_iter
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        fit_rows, val_rows = X, X
        if self.validation_fraction > 0:
            rng = np.random.default_rng(self.random_state)
            perm = rng.permutation(len(X))
            n_val = int(round(self.validation_fraction * len(X)))
            if n_val < 1 or len(X) - n_val < 1:
                raise DataError("validation_fraction leaves an empty split")
            val_rows, fit_rows = X[perm[:n_val]], X[perm[n_val:]]
        k = min(self.n_clusters, len(fit_rows))
        self.model_ = fit(fit_rows, k, self.random_state, self.max_iter, self.n_init)
        if self.theta is None:
            self.model_.theta = calibrate_theta(self.model_, val_rows, self.threshold_quantile)
        else:
            self.model_.theta = float(self.theta)
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_model(cls, model: CentroidModel, **params) -> CentroidAnomalyDetector:
        est = cls(n_clusters=model.k, **params)
        est.model_ = model
        est.n_features_in_ = model.d
        return est

    @property
    def cluster_centers_(self) -> np.ndarray:
        check_is_fitted(self)
        return self.model_.centroids

    @property
    def d_mean_(self) -> float:
        check_is_fitted(self)
        return self.model_.d_mean

    @property
    def theta_(self) -> float:
        check_is_fitted(self)
        return self.model_.theta

    def _check(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def anomaly_score(self, X) -> np.ndarray:
        return normalized_scores(self.model_, self._check(X))

    def score_samples(self, X) -> np.ndarray:
        return -self.anomaly_score(X)

    def decision_function(self, X) -> np.ndarray:
        return self.model_.theta - self.anomaly_score(X)

    def predict(self, X) -> np.ndarray:
        return np.where(self.anomaly_score(X) > self.model_.theta, -1, 1)
