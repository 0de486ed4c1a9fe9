"""Operation-count benchmarking.

Wall-clock comparisons are hardware noise; the scaling story is told in
secure-product counts. ``run_scaling`` sweeps model shapes on synthetic
data engineered to grow complete trees (gamma = 0) and checks the counts
against the closed-form cost model; ``table2`` prices the division-free
argmax against the division-based baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .argmax import div_argmax_mul_count, pipeline_mul_count, securemax_mul_count
from .config import HyperParams, RunConfig, SessionConfig
from .data import synthetic_partition
from .session import train_federated
from .tree import TreeNode

TABLE2_SHAPES = [(16, 8), (16, 16), (32, 16)]


def table2() -> list[dict]:
    rows = []
    for j, k in TABLE2_SHAPES:
        rows.append({
            "features": j,
            "buckets": k,
            "div_muls": div_argmax_mul_count(j, k),
            "no_div_muls": securemax_mul_count(j, k),
        })
    return rows


def render_table(rows: list[dict]) -> str:
    headers = list(rows[0].keys())
    widths = [max(len(h), *(len(f"{r[h]:,}" if isinstance(r[h], int) else str(r[h]))
                            for r in rows)) for h in headers]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    lines = [fmt.format(*headers)]
    for r in rows:
        lines.append(fmt.format(*(f"{r[h]:,}" if isinstance(r[h], int) else str(r[h])
                                  for h in headers)))
    return "\n".join(lines)


def internal_node_count(tree: TreeNode) -> int:
    if not tree.is_internal():
        return 0
    return 1 + internal_node_count(tree.left) + internal_node_count(tree.right)


@dataclass
class BenchCell:
    trees: int
    depth: int
    features: int
    buckets: int
    instances: int
    parties: int
    internal_nodes: int = 0
    complete: bool = False
    measured_total: int = 0
    measured_split: int = 0
    formula_total: int = 0
    formula_split: int = 0
    expected_formula: int = 0
    wall_time_s: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


SPLIT_PHASES = ("bucket_agg", "candidate_squares", "node_terms",
                "argmax_compare", "gain_sign", "child_prep")


def run_cell(trees: int, depth: int, features: int, *, buckets: int = 10,
             instances: int = 256, parties: int = 3, seed: int = 11) -> BenchCell:
    """One training run per grid point, gamma=0 so every node splits."""
    cfg = RunConfig(
        session=SessionConfig(parties=parties, seed=seed, record_transcripts=False),
        params=HyperParams(trees=trees, max_depth=depth, lam=1.0, gamma=0.0,
                           buckets=buckets),
    )
    data = synthetic_partition(instances, features, seed=seed, m=parties)
    out = train_federated(cfg, data)
    counters = out.counters[1]
    cell = BenchCell(trees, depth, features, buckets, instances, parties)
    cell.internal_nodes = sum(internal_node_count(t) for t in out.models[1].trees)
    cell.complete = cell.internal_nodes == trees * (2 ** depth - 1)
    cell.measured_total = counters.measured
    cell.measured_split = sum(counters.by_phase.get(p, 0) for p in SPLIT_PHASES)
    cell.formula_total = counters.formula_total
    cell.formula_split = counters.formula.get("split_phase", 0)
    cell.expected_formula = pipeline_mul_count(trees, depth, features, buckets,
                                               parties, instances)
    cell.wall_time_s = out.wall_time
    return cell


def run_scaling(*, tree_counts=(1, 2, 3), depths=(2, 3), feature_counts=(8, 16),
                buckets: int = 10, instances: int = 256, parties: int = 3,
                seed: int = 11) -> dict:
    """Sweep T, d and J; verify the analytic cost model against measurements."""
    base_depth = depths[0]
    base_features = feature_counts[0]
    cells: list[BenchCell] = []
    for t in tree_counts:
        cells.append(run_cell(t, base_depth, base_features, buckets=buckets,
                              instances=instances, parties=parties, seed=seed))
    for d in depths[1:]:
        cells.append(run_cell(tree_counts[-1], d, base_features, buckets=buckets,
                              instances=instances, parties=parties, seed=seed))
    for j in feature_counts[1:]:
        cells.append(run_cell(tree_counts[-1], base_depth, j, buckets=buckets,
                              instances=instances, parties=parties, seed=seed))

    all_complete = all(c.complete for c in cells)
    formula_exact = all(c.formula_total == c.expected_formula for c in cells
                        if c.complete)

    t_cells = [c for c in cells if c.depth == base_depth and c.features == base_features]
    per_tree = [c.formula_split / c.trees for c in t_cells]
    t_linear = len({round(v, 9) for v in per_tree}) == 1
    per_tree_measured = [c.measured_split / c.trees for c in t_cells]
    t_linear_measured = len({round(v, 9) for v in per_tree_measured}) == 1

    d_cells = [c for c in cells if c.trees == tree_counts[-1] and c.features == base_features]
    per_node = [c.formula_split / (c.trees * (2 ** c.depth - 1)) for c in d_cells]
    d_proportional = len({round(v, 9) for v in per_node}) == 1

    return {
        "cells": [c.as_dict() for c in cells],
        "checks": {
            "complete_trees": all_complete,
            "formula_matches_closed_form": formula_exact,
            "per_tree_constant_across_T": t_linear,
            "per_tree_measured_constant_across_T": t_linear_measured,
            "per_node_proportional_to_depth": d_proportional,
        },
    }
