"""Binary classification metrics: accuracy, F1, rank-based AUC."""

from __future__ import annotations

import numpy as np


def accuracy(y: np.ndarray, prob: np.ndarray) -> float:
    pred = (np.asarray(prob) > 0.5).astype(np.float64)
    return float(np.mean(pred == np.asarray(y)))


def f1_score(y: np.ndarray, prob: np.ndarray) -> float:
    y = np.asarray(y)
    pred = (np.asarray(prob) > 0.5).astype(np.float64)
    tp = float(np.sum((pred == 1) & (y == 1)))
    fp = float(np.sum((pred == 1) & (y == 0)))
    fn = float(np.sum((pred == 0) & (y == 1)))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def auc_score(y: np.ndarray, scores: np.ndarray) -> float | None:
    """Mann-Whitney AUC with midrank tie handling; None for single-class y."""
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=np.float64)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        tie_end = i
        while tie_end + 1 < len(scores) and sorted_scores[tie_end + 1] == sorted_scores[i]:
            tie_end += 1
        midrank = 0.5 * (i + tie_end) + 1.0  # ranks are 1-based
        ranks[order[i:tie_end + 1]] = midrank
        i = tie_end + 1
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(y: np.ndarray, prob: np.ndarray) -> dict:
    """Metric bundle at the 0.5 probability threshold; AUC omitted when undefined."""
    out = {"acc": accuracy(y, prob), "f1": f1_score(y, prob)}
    auc = auc_score(y, prob)
    if auc is not None:
        out["auc"] = auc
    return out
