"""Euclidean projection onto the probability simplex."""
from __future__ import annotations

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Project every vector along the last axis of ``v`` onto the unit simplex.

    Sort-based method: find the largest k with u_k > (sum_{i<=k} u_i - 1)/k
    for u sorted in decreasing order and shift by that threshold.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, n + 1)
    rho = np.count_nonzero(u - css / k > 0, axis=-1)
    theta = np.take_along_axis(css, (rho - 1)[..., None], axis=-1) / rho[..., None]
    return np.maximum(v - theta, 0.0)
