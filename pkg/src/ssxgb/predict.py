"""Cooperative prediction over partial trees.

Each party walks its own tree: owned splits follow the threshold, dummy
nodes explore both branches, so the local 0/1 leaf indicators over-select.
The elementwise product of all M indicators (taken in share space) is
one-hot, and dotted with the shared leaf weights it yields the prediction,
restored at party 1 only.
"""

from __future__ import annotations

import numpy as np

from .party import Party
from .sharing import Share
from .transport import ProtocolError, Tag
from .tree import DUMMY, LEAF, SPLIT, TreeNode


def leaf_weight_shares(tree: TreeNode, pid: int) -> Share:
    """This party's slices of the leaf weights, left-to-right preorder order."""
    weights: list[float] = []

    def walk(node: TreeNode) -> None:
        if node.kind == LEAF:
            weights.append(float(node.weight.values))
        else:
            walk(node.left)
            walk(node.right)

    walk(tree)
    return Share(np.array(weights), pid)


def count_leaves(tree: TreeNode) -> int:
    if tree.kind == LEAF:
        return 1
    return count_leaves(tree.left) + count_leaves(tree.right)


def local_indicator(tree: TreeNode, x_local: np.ndarray) -> np.ndarray:
    """(instances x leaves) 0/1 matrix of leaves consistent with local splits.

    Boundary rule matches training: x equal to the threshold goes left.
    """
    n = x_local.shape[0]
    out = np.zeros((n, count_leaves(tree)))

    def walk(node: TreeNode, rows: np.ndarray, offset: int) -> int:
        if node.kind == LEAF:
            out[rows, offset] = 1.0
            return offset + 1
        if node.kind == DUMMY:
            offset = walk(node.left, rows, offset)
            return walk(node.right, rows, offset)
        if node.kind != SPLIT:
            raise ProtocolError(f"malformed tree node kind {node.kind!r}")
        go_left = x_local[:, node.local_col] <= node.threshold
        offset = walk(node.left, rows & go_left, offset)
        return walk(node.right, rows & ~go_left, offset)

    walk(tree, np.ones(n, dtype=bool), 0)
    return out


def secure_predict_tree(party: Party, tree: TreeNode,
                        x_local: np.ndarray) -> np.ndarray | None:
    """Batch prediction for one tree; returns raw scores on party 1, None elsewhere.

    Costs M secure products per tree: M-1 chained indicator products in
    ascending party order plus the weight product.
    """
    indicator = local_indicator(tree, x_local)
    shares: list[Share] = []
    for owner in range(1, party.m + 1):
        value = indicator if owner == party.id else None
        shares.append(party.shr(value, owner, tag=Tag.PREDICT_SHARE,
                                label="local_indicator"))
    with party.phase("predict"):
        s = shares[0]
        for nxt in shares[1:]:
            s = party.mul(s, nxt)
        w = leaf_weight_shares(tree, party.id)
        y_share = party.mul(s, w.tile((indicator.shape[0], 1))).sum_axis(1)
    return party.reconstruct_at(y_share, 1, label="predict.yhat",
                                tag=Tag.PREDICT_SHARE)


def secure_predict(party: Party, trees: list[TreeNode],
                   x_local: np.ndarray) -> np.ndarray | None:
    """Ensemble prediction: per-tree scores summed on party 1."""
    total = np.zeros(x_local.shape[0]) if party.id == 1 else None
    for tree in trees:
        y_t = secure_predict_tree(party, tree, x_local)
        if party.id == 1:
            total = total + y_t
    return total
