"""Centralized reference booster.

Implements the same quantile schema, candidate scan order, tie rule,
gamma-gated splitting and leaf weights as the federated trainer, but on
plaintext with exact divisions. Training a federated model and this
reference on identical data must produce identical tree structures and
predictions (up to solver precision); the tests rely on that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .binning import bucket_masks, equal_frequency_thresholds, left_indicator
from .config import ConfigError, HyperParams
from .tree import compute_gradients


@dataclass
class OracleNode:
    kind: str  # "split" | "leaf"
    feature: int | None = None   # permuted global feature id
    bucket: int | None = None
    threshold: float | None = None
    weight: float | None = None
    left: "OracleNode | None" = None
    right: "OracleNode | None" = None


@dataclass
class CentralizedBooster:
    """Plaintext trainer with the trainer's exact decision semantics."""

    params: HyperParams
    permutation: np.ndarray          # permuted id -> canonical column
    owners: list[int] | None = None  # canonical column -> party (first-layer mask)
    trees_: list[OracleNode] = field(default_factory=list)
    thresholds_: list[np.ndarray] = field(default_factory=list)

    def fit(self, x: np.ndarray, y: np.ndarray) -> "CentralizedBooster":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.params.first_layer_mask and self.owners is None:
            raise ConfigError("first_layer_mask needs the ownership map")
        self.thresholds_ = [equal_frequency_thresholds(x[:, c], self.params.buckets)
                            for c in range(x.shape[1])]
        self.trees_ = []
        y_hat = np.zeros(x.shape[0])
        for _ in range(self.params.trees):
            g, h = compute_gradients(y, y_hat, self.params.loss)
            s = np.ones(x.shape[0])
            tree = self._build(x, g, h, s, 0)
            self.trees_.append(tree)
            y_hat = y_hat + self._predict_tree(tree, x)
        return self

    def _scan_ids(self, depth: int) -> list[int]:
        ids = range(len(self.permutation))
        if depth == 0 and self.params.first_layer_mask:
            return [p for p in ids if self.owners[self.permutation[p]] == 1]
        return list(ids)

    def _build(self, x, g, h, s, depth) -> OracleNode:
        lam, gamma = self.params.lam, self.params.gamma
        b = g.sum()
        a = h.sum() + lam
        if depth >= self.params.max_depth:
            return OracleNode("leaf", weight=-b / a)

        parent_term = b * b / a
        best_gain = None
        best = None
        for p in self._scan_ids(depth):
            col = self.permutation[p]
            masks = bucket_masks(x[:, col], self.thresholds_[col])
            g_left = np.cumsum(masks @ g)
            h_left = np.cumsum(masks @ h)
            gl2 = g_left * g_left
            gr = b - g_left
            gains = 0.5 * (gl2 / (h_left + lam)
                           + gr * gr / (h.sum() - h_left + lam)
                           - parent_term) - gamma
            for k, gain in enumerate(gains):
                if best_gain is None or gain > best_gain:
                    best_gain, best = gain, (p, k)
        if best_gain is None or best_gain <= 0:
            return OracleNode("leaf", weight=-b / a)

        p, k = best
        col = self.permutation[p]
        threshold = float(self.thresholds_[col][k])
        sl_full = left_indicator(x[:, col], threshold)
        sl = sl_full * s
        sr = (1.0 - sl_full) * s
        left = self._build(x, g * sl, h * sl, sl, depth + 1)
        right = self._build(x, g * sr, h * sr, sr, depth + 1)
        return OracleNode("split", feature=p, bucket=k, threshold=threshold,
                          left=left, right=right)

    def _predict_tree(self, tree: OracleNode, x: np.ndarray) -> np.ndarray:
        out = np.zeros(x.shape[0])

        def walk(node: OracleNode, rows: np.ndarray) -> None:
            if node.kind == "leaf":
                out[rows] = node.weight
                return
            go_left = x[:, self.permutation[node.feature]] <= node.threshold
            walk(node.left, rows & go_left)
            walk(node.right, rows & ~go_left)

        walk(tree, np.ones(x.shape[0], dtype=bool))
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        total = np.zeros(x.shape[0])
        for tree in self.trees_:
            total = total + self._predict_tree(tree, x)
        return total

    def dump(self) -> list[list[dict]]:
        """Preorder node dicts per tree (structural comparison format)."""
        def nodes(node: OracleNode, acc: list) -> list:
            if node.kind == "leaf":
                acc.append({"kind": "leaf", "weight": node.weight})
            else:
                acc.append({"kind": "split", "feature": node.feature,
                            "bucket": node.bucket, "threshold": node.threshold})
                nodes(node.left, acc)
                nodes(node.right, acc)
            return acc

        return [nodes(tree, []) for tree in self.trees_]
