from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..exceptions import NumericalError


def default_partner(n_total: int) -> np.ndarray:
    """Pairing for projections laid out as [views A of all graphs, views B of all graphs]."""
    half = n_total // 2
    return np.concatenate([np.arange(half, n_total), np.arange(half)])


def contrastive_loss(projections, tau: float = 0.5, partner=None):
    """Temperature-scaled cosine contrastive loss and its gradient.

    Each of the ``2N`` rows is an anchor; its positive is ``partner[i]`` and
    every other row except itself is in the denominator. Returns the mean
    over anchors and the gradient with respect to ``projections``.
    """
    Pm = np.asarray(projections, dtype=float)
    n = Pm.shape[0]
    if tau <= 0:
        raise ValueError("temperature must be positive")
    if n < 4 or n % 2:
        raise ValueError("need 2N projections with N >= 2")
    partner = default_partner(n) if partner is None else np.asarray(partner)
    norms = np.linalg.norm(Pm, axis=1)
    if np.any(norms == 0):
        raise NumericalError("zero-norm projection; cosine similarity undefined")
    U = Pm / norms[:, None]
    S = (U @ U.T) / tau
    np.fill_diagonal(S, -np.inf)
    lse = logsumexp(S, axis=1)
    rows = np.arange(n)
    loss = float(np.mean(lse - S[rows, partner]))

    soft = np.exp(S - lse[:, None])
    soft[rows, partner] -= 1.0
    dS = soft / n  # diagonal already zero
    dU = (dS + dS.T) @ U / tau
    radial = np.einsum("ij,ij->i", U, dU)
    dP = (dU - U * radial[:, None]) / norms[:, None]
    return loss, dP
