"""Per-party model persistence.

Each party writes its own JSON file: ensemble metadata plus preorder node
arrays. Split thresholds appear only in the owner's file; other parties
persist dummies. Files from different sessions refuse to load together
(topology hash mismatch).
"""

from __future__ import annotations

import json
import os

import numpy as np

from .sharing import Share
from .tree import DUMMY, LEAF, SPLIT, PartyModel, TreeNode

FORMAT = "ssxgb-model/1"


class ModelIOError(ValueError):
    pass


def _nodes_preorder(node: TreeNode, acc: list) -> list:
    if node.kind == LEAF:
        acc.append({"kind": LEAF, "weight_share": float(node.weight.values)})
        return acc
    rec: dict = {"kind": node.kind}
    if node.kind == SPLIT:
        rec["local_feature_id"] = node.local_col
        rec["threshold"] = node.threshold
    acc.append(rec)
    _nodes_preorder(node.left, acc)
    _nodes_preorder(node.right, acc)
    return acc


def _nodes_from_preorder(records: list, pos: int, pid: int):
    rec = records[pos]
    kind = rec["kind"]
    if kind == LEAF:
        return TreeNode(LEAF, weight=Share(np.asarray(rec["weight_share"]), pid)), pos + 1
    left, pos = _nodes_from_preorder(records, pos + 1, pid)
    right, pos = _nodes_from_preorder(records, pos, pid)
    if kind == SPLIT:
        return TreeNode(SPLIT, local_col=rec["local_feature_id"],
                        threshold=rec["threshold"], left=left, right=right), pos
    if kind == DUMMY:
        return TreeNode(DUMMY, left=left, right=right), pos
    raise ModelIOError(f"unknown node kind {kind!r}")


def model_path(dirpath: str, party: int) -> str:
    return os.path.join(dirpath, f"model_party{party}.json")


def save_models(dirpath: str, models: dict[int, PartyModel]) -> None:
    os.makedirs(dirpath, exist_ok=True)
    for party, model in models.items():
        doc = {
            "format": FORMAT,
            "party": party,
            "parties": model.m,
            "meta": model.meta,
            "trees": [_nodes_preorder(tree, []) for tree in model.trees],
        }
        with open(model_path(dirpath, party), "w") as fh:
            json.dump(doc, fh)


def load_models(dirpath: str) -> dict[int, PartyModel]:
    first = model_path(dirpath, 1)
    if not os.path.exists(first):
        raise ModelIOError(f"missing model file for party 1: {first}")
    with open(first) as fh:
        head = json.load(fh)
    m = int(head["parties"])

    models: dict[int, PartyModel] = {}
    for party in range(1, m + 1):
        path = model_path(dirpath, party)
        if not os.path.exists(path):
            raise ModelIOError(f"missing model file for party {party}: {path}")
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != FORMAT:
            raise ModelIOError(f"unknown model format in {path}")
        trees = [_nodes_from_preorder(records, 0, party)[0] for records in doc["trees"]]
        models[party] = PartyModel(party, m, trees, doc["meta"])

    hashes = {p: models[p].meta.get("topology_hash") for p in models}
    if len(set(hashes.values())) != 1:
        raise ModelIOError(f"topology hash mismatch across party files: {hashes}")
    check_shapes(models)
    return models


def _kind_sequence(tree: TreeNode, acc: list) -> list:
    acc.append("internal" if tree.is_internal() else LEAF)
    if tree.is_internal():
        _kind_sequence(tree.left, acc)
        _kind_sequence(tree.right, acc)
    return acc


def _split_sequence(tree: TreeNode, acc: list) -> list:
    if tree.is_internal():
        acc.append(tree.kind == SPLIT)
        _split_sequence(tree.left, acc)
        _split_sequence(tree.right, acc)
    return acc


def check_shapes(models: dict[int, PartyModel]) -> None:
    """All partial trees must agree in shape, with exactly one split owner
    per internal position."""
    parties = sorted(models)
    tree_counts = {len(models[p].trees) for p in parties}
    if len(tree_counts) != 1:
        raise ModelIOError(f"tree counts differ across parties: {tree_counts}")
    for t in range(tree_counts.pop()):
        shapes = {tuple(_kind_sequence(models[p].trees[t], [])) for p in parties}
        if len(shapes) != 1:
            raise ModelIOError(f"tree {t} shapes differ across parties")
        split_flags = np.array([_split_sequence(models[p].trees[t], []) for p in parties],
                               dtype=int)
        owners_per_position = split_flags.sum(axis=0)
        if split_flags.size and not np.all(owners_per_position == 1):
            raise ModelIOError(
                f"tree {t}: every internal position needs exactly one split owner")
