"""Equal-frequency split candidates.

Thresholds are order statistics of the full column, computed once per
session by the feature owner; degenerate buckets (repeated thresholds)
collapse, leaving fewer effective candidates. Both the federated trainer
and the centralized reference use exactly these functions, which is what
makes structural comparison meaningful.
"""

from __future__ import annotations

import math

import numpy as np


def equal_frequency_thresholds(column: np.ndarray, buckets: int) -> np.ndarray:
    """Upper bucket edges: the k/K-th order statistics, deduplicated.

    The last threshold is the column maximum, so bucket membership
    ``prev < x <= edge`` covers every instance.
    """
    if buckets < 1:
        raise ValueError("buckets must be >= 1")
    col = np.sort(np.asarray(column, dtype=np.float64))
    n = col.size
    if n == 0:
        raise ValueError("empty column")
    edges = []
    for k in range(1, buckets + 1):
        idx = math.ceil(n * k / buckets) - 1
        edges.append(col[idx])
    return np.unique(edges)


def bucket_masks(column: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """0/1 matrix (buckets x instances): row k marks prev < x <= thresholds[k]."""
    col = np.asarray(column, dtype=np.float64)
    lo = np.concatenate(([-np.inf], thresholds[:-1]))
    return ((col[None, :] > lo[:, None]) & (col[None, :] <= thresholds[:, None])).astype(np.float64)


def left_indicator(column: np.ndarray, threshold: float) -> np.ndarray:
    """Full-column split rule: x <= threshold goes left (boundary stays left)."""
    return (np.asarray(column, dtype=np.float64) <= threshold).astype(np.float64)
