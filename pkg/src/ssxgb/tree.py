"""Secure construction of boosted trees over vertically partitioned data.

Party 1 computes gradients and shares them once per tree; every deeper
node's gradient slices are derived by multiplying with secret-shared child
indicators, so instance membership never leaves share space. All parties
walk the same recursion in the same order, which keeps the M partial trees
structurally identical: the split owner records the real split, everyone
else records a placeholder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .argmax import (CandidateStats, ceil_log2, secure_argmax,
                     securemax_mul_count)
from .binning import bucket_masks, equal_frequency_thresholds, left_indicator
from .config import ConfigError, HyperParams, LOSS_LOGLOSS, LOSS_MSE
from .leafweight import secure_leaf_weight
from .party import Party, receive_feature_permutation
from .sharing import Share
from .transport import Tag

SPLIT = "split"
DUMMY = "dummy"
LEAF = "leaf"


@dataclass
class TreeNode:
    """One position of a partial tree.

    Exactly one party holds the split (feature, bucket, threshold) for an
    internal position; the others hold a dummy and later explore both
    branches at prediction time. Leaf weights are stored as this party's
    share only.
    """

    kind: str
    feature: int | None = None    # permuted global feature id (split owner only)
    bucket: int | None = None
    threshold: float | None = None
    local_col: int | None = None  # owner's column index, used at prediction
    weight: Share | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    def is_internal(self) -> bool:
        return self.kind in (SPLIT, DUMMY)


@dataclass
class ScanFeature:
    """Per-feature scan metadata; thresholds exist on the owner only."""

    pid: int           # permuted global id (scan/tie-break order)
    owner: int
    local_col: int | None
    thresholds: np.ndarray | None
    count: int = 0     # effective candidate count, public


@dataclass
class BuildState:
    params: HyperParams
    scan: list
    x: np.ndarray
    n: int


@dataclass
class PartyModel:
    party: int
    m: int
    trees: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def compute_gradients(y: np.ndarray, y_hat: np.ndarray, loss: str):
    """First/second-order statistics of the pointwise loss at y_hat."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if loss == LOSS_LOGLOSS:
        pred = sigmoid(y_hat)
        return pred - y, pred * (1.0 - pred)
    if loss == LOSS_MSE:
        return y_hat - y, np.ones_like(y)
    raise ConfigError(f"unknown loss {loss!r}")


def _sub_from_scalar(scalar: Share, vec: Share) -> Share:
    return Share(scalar.values - vec.values, vec.owner)


def secure_agg_bucket(party: Party, st: BuildState, gs: Share, hs: Share,
                      feature: ScanFeature):
    """Bucket-aggregated gradient/hessian share rows for one feature.

    The owner shares its 0/1 bucket-membership matrix; two whole-matrix
    secure products (one for g, one for h) then reduce over instances,
    which realizes the 2-products-per-feature accounting.
    """
    k_eff = feature.count
    if feature.owner == party.id:
        mask = bucket_masks(st.x[:, feature.local_col], feature.thresholds)
    else:
        mask = None
    mask_share = party.shr(mask, feature.owner, label="bucket_mask")
    with party.phase("bucket_agg"):
        g_row = party.mul(mask_share, gs.tile((k_eff, 1))).sum_axis(1)
        h_row = party.mul(mask_share, hs.tile((k_eff, 1))).sum_axis(1)
    return g_row, h_row


def _candidate_stats(party: Party, st: BuildState, gs: Share, hs: Share,
                     g_sum: Share, h_sum: Share) -> dict[int, CandidateStats]:
    lam = st.params.lam
    stats: dict[int, CandidateStats] = {}
    for feature in st.scan:
        g_row, h_row = secure_agg_bucket(party, st, gs, hs, feature)
        gl_prefix = Share(np.cumsum(g_row.values), party.id)
        hl_prefix = Share(np.cumsum(h_row.values), party.id)
        gr_prefix = _sub_from_scalar(g_sum, gl_prefix)
        with party.phase("candidate_squares"):
            gl_sq = party.mul(gl_prefix, gl_prefix)
            gr_sq = party.mul(gr_prefix, gr_prefix)
        lam_vec = party.const_share(lam, shape=gl_prefix.shape)
        hl = hl_prefix + lam_vec
        hr = _sub_from_scalar(h_sum, hl_prefix) + lam_vec
        stats[feature.pid] = CandidateStats(gl_sq, gr_sq, hl, hr)
    return stats


def _make_leaf(party: Party, st: BuildState, g_sum: Share, h_sum: Share) -> TreeNode:
    w = secure_leaf_weight(party, g_sum, h_sum, lam=st.params.lam,
                           mu=st.params.mu, ratio_floor=st.params.ratio_floor)
    return TreeNode(LEAF, weight=w)


def candidate_features_at(st: BuildState, party: Party, depth: int) -> list[int]:
    """Scan set for one node; the first-layer mask restricts the root to
    features owned by party 1."""
    if depth == 0 and st.params.first_layer_mask:
        feats = [f.pid for f in st.scan if f.owner == 1]
        if not feats:
            raise ConfigError("first_layer_mask requires party 1 to own a feature")
        return feats
    return [f.pid for f in st.scan]


def secure_build(party: Party, st: BuildState, gs: Share, hs: Share, ss: Share,
                 depth: int) -> TreeNode:
    g_sum = gs.sum()
    h_sum = hs.sum()
    if depth >= st.params.max_depth:
        return _make_leaf(party, st, g_sum, h_sum)

    with party.phase("node_terms"):
        loss_n = party.mul(g_sum, g_sum)
    loss_d = h_sum + party.const_share(st.params.lam)

    stats = _candidate_stats(party, st, gs, hs, g_sum, h_sum)
    candidates = candidate_features_at(st, party, depth)
    two_gamma = party.const_share(2.0 * st.params.gamma)
    j_best, k_best, gain_sign = secure_argmax(party, stats, candidates,
                                              loss_n, loss_d, two_gamma)

    j_cand = len(candidates)
    party.counters.add_formula(
        "split_phase",
        2 * len(st.scan) + securemax_mul_count(j_cand, st.params.buckets) + 8)

    if gain_sign <= 0:
        return _make_leaf(party, st, g_sum, h_sum)

    party.counters.add_formula("split_phase", 6)
    feature = st.scan[j_best]
    if feature.owner == party.id:
        threshold = float(feature.thresholds[k_best])
        sl_full = left_indicator(st.x[:, feature.local_col], threshold)
        sr_full = 1.0 - sl_full
    else:
        threshold = None
        sl_full = sr_full = None
    sl = party.shr(sl_full, feature.owner, tag=Tag.SPLIT_INFO, label="split_left")
    sr = party.shr(sr_full, feature.owner, tag=Tag.SPLIT_INFO, label="split_right")

    with party.phase("child_prep"):
        sl = party.mul(sl, ss)
        sr = party.mul(sr, ss)
        gl = party.mul(gs, sl)
        gr = party.mul(gs, sr)
        hl = party.mul(hs, sl)
        hr = party.mul(hs, sr)

    left = secure_build(party, st, gl, hl, sl, depth + 1)
    right = secure_build(party, st, gr, hr, sr, depth + 1)
    if feature.owner == party.id:
        return TreeNode(SPLIT, feature=j_best, bucket=k_best, threshold=threshold,
                        local_col=feature.local_col, left=left, right=right)
    return TreeNode(DUMMY, left=left, right=right)


def secure_fit(party: Party, st: BuildState, labels: np.ndarray | None,
               y_hat: np.ndarray | None) -> TreeNode:
    """One boosting round: party 1 shares fresh gradients, everyone builds."""
    if party.id == 1:
        g, h = compute_gradients(labels, y_hat, st.params.loss)
        s = np.ones(st.n)
    else:
        g = h = s = None
    gs = party.shr(g, 1, label="grad")
    hs = party.shr(h, 1, label="hess")
    ss = party.shr(s, 1, label="indicator")
    return secure_build(party, st, gs, hs, ss, 0)


def build_scan(party: Party, params: HyperParams, x_local: np.ndarray,
               owners: list[int], my_cols: dict[int, int]) -> list[ScanFeature]:
    """Receive the coordinator's feature permutation, compute local quantiles,
    and exchange public candidate counts."""
    perm = receive_feature_permutation(party)
    scan: list[ScanFeature] = []
    for pid, canonical in enumerate(perm):
        owner = owners[canonical]
        if owner == party.id:
            col = my_cols[int(canonical)]
            thresholds = equal_frequency_thresholds(x_local[:, col], params.buckets)
            scan.append(ScanFeature(pid, owner, col, thresholds))
        else:
            scan.append(ScanFeature(pid, owner, None, None))

    for src in range(1, party.m + 1):
        if src == party.id:
            mine = np.array([[f.pid, len(f.thresholds)] for f in scan
                             if f.owner == src], dtype=np.float64).reshape(-1, 2)
        else:
            mine = None
        table = party.publish(mine, src, tag=Tag.SPLIT_INFO, label="bucket_counts")
        for pid, count in table.reshape(-1, 2):
            scan[int(pid)].count = int(count)
    return scan


def train_program(party: Party, params: HyperParams, x_local: np.ndarray,
                  owners: list[int], my_cols: dict[int, int],
                  labels: np.ndarray | None = None):
    """Full training pipeline for one party; returns (model, y_hat-on-P1)."""
    from .predict import secure_predict_tree  # circular at module load only

    scan = build_scan(party, params, x_local, owners, my_cols)
    st = BuildState(params, scan, x_local, x_local.shape[0])

    y_hat = np.zeros(st.n) if party.id == 1 else None
    trees: list[TreeNode] = []
    for t in range(params.trees):
        tree = secure_fit(party, st, labels, y_hat)
        trees.append(tree)
        y_t = secure_predict_tree(party, tree, x_local)
        if t < params.trees - 1:
            party.counters.add_formula("predict_update", party.m * st.n)
        if party.id == 1:
            y_hat = y_hat + y_t

    model = PartyModel(party.id, party.m, trees)
    return model, y_hat
