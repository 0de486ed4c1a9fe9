"""Command-line entry point.

Subcommands: train, predict, eval, bench, oracle, audit. Configuration
comes from a single JSON document; selected flags override fields. The
SSXGB_LOG environment variable controls log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from . import bench as bench_mod
from .config import DatasetSpec, HyperParams, RunConfig, SessionConfig
from .data import ingest, synthetic_partition
from .metrics import evaluate
from .model_io import load_models, save_models
from .session import (compare_with_oracle, oracle_for, predict_federated,
                      train_federated)
from .tree import sigmoid

log = logging.getLogger("ssxgb")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.session.seed = args.seed
    if getattr(args, "parties", None) is not None:
        cfg.session.parties = args.parties
    if getattr(args, "backend", None) is not None:
        cfg.session.backend = args.backend
    if getattr(args, "trees", None) is not None:
        cfg.params.trees = args.trees
    if getattr(args, "depth", None) is not None:
        cfg.params.max_depth = args.depth
    if getattr(args, "buckets", None) is not None:
        cfg.params.buckets = args.buckets
    if getattr(args, "first_layer_mask", None) is not None:
        cfg.params.first_layer_mask = args.first_layer_mask
    if getattr(args, "data", None):
        cfg.dataset.path = args.data
    cfg.validate()
    return cfg


def _load_data(cfg: RunConfig, args):
    """CSV when configured, otherwise seeded synthetic data."""
    if cfg.dataset.path:
        return ingest(cfg.dataset, cfg.session.parties, cfg.session.seed)
    n = getattr(args, "synthetic_n", None) or 500
    j = getattr(args, "synthetic_j", None) or 8
    log.info("no dataset path; generating synthetic data n=%d j=%d", n, j)
    data = synthetic_partition(n, j, cfg.session.seed, m=cfg.session.parties,
                               loss=cfg.params.loss)
    return data, None


def _write_predictions(path: str, row_ids, scores, loss: str) -> None:
    frame = {"instance_id": np.asarray(row_ids, dtype=int), "score": scores}
    if loss == "logloss":
        frame["probability"] = sigmoid(np.asarray(scores))
    pd.DataFrame(frame).to_csv(path, index=False)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    train, test = _load_data(cfg, args)
    out = train_federated(cfg, train)
    report = out.report()
    report["config"] = cfg.to_dict()

    if args.with_oracle:
        cmp = compare_with_oracle(out, train)
        report["oracle_delta"] = {
            "max_abs_pred_diff": cmp["max_abs_pred_diff"],
            "trees_match": cmp["trees_match"],
        }
    if test is not None and cfg.params.loss == "logloss":
        scores, _ = predict_federated(out.models, test, seed=cfg.session.seed + 1,
                                      backend=cfg.session.backend)
        report["metrics"] = evaluate(test.labels, sigmoid(scores))
    elif cfg.params.loss == "logloss":
        report["metrics"] = evaluate(train.labels, sigmoid(out.y_hat))

    if args.out:
        save_models(args.out, out.models)
        cfg.save_json(os.path.join(args.out, "session.json"))
        log.info("models written to %s", args.out)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2)
    print(json.dumps({k: v for k, v in report.items() if k != "config"}, indent=2))
    return 0


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    models = load_models(args.models)
    data, _ = _load_data(cfg, args)
    if isinstance(data, tuple):
        data = data[0]
    scores, _ = predict_federated(models, data, seed=cfg.session.seed + 1,
                                  backend=cfg.session.backend)
    loss = models[1].meta.get("params", {}).get("loss", cfg.params.loss)
    _write_predictions(args.out, data.row_ids, scores, loss)
    log.info("predictions written to %s", args.out)
    return 0


def cmd_eval(args) -> int:
    preds = pd.read_csv(args.preds)
    labels = pd.read_csv(args.labels)
    label_col = args.label_column
    if label_col not in labels.columns:
        print(f"label column {label_col!r} not found", file=sys.stderr)
        return 2
    col = "probability" if "probability" in preds.columns else "score"
    merged = labels.iloc[preds["instance_id"].to_numpy(dtype=int)]
    metrics = evaluate(merged[label_col].to_numpy(dtype=float),
                       preds[col].to_numpy(dtype=float))
    print(json.dumps(metrics, indent=2))
    return 0


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    data, _ = _load_data(cfg, args)
    if isinstance(data, tuple):
        data = data[0]
    booster = oracle_for(cfg, data)
    booster.fit(data.full_matrix(), data.labels)
    scores = booster.predict(data.full_matrix())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_predictions(os.path.join(args.out, "oracle_predictions.csv"),
                           data.row_ids, scores, cfg.params.loss)
        with open(os.path.join(args.out, "oracle_trees.json"), "w") as fh:
            json.dump(booster.dump(), fh, indent=2)
    if cfg.params.loss == "logloss":
        print(json.dumps(evaluate(data.labels, sigmoid(scores)), indent=2))
    return 0


def cmd_bench(args) -> int:
    report: dict = {"table2": bench_mod.table2()}
    if not args.table2_only:
        report["scaling"] = bench_mod.run_scaling(
            tree_counts=tuple(args.trees_grid), depths=tuple(args.depths),
            feature_counts=tuple(args.features), buckets=args.buckets,
            instances=args.instances, parties=args.parties, seed=args.seed or 11)
    print("argmax cost (secure products):")
    print(bench_mod.render_table(report["table2"]))
    if "scaling" in report:
        print("\nscaling checks:", json.dumps(report["scaling"]["checks"], indent=2))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
    return 0


def cmd_audit(args) -> int:
    cfg = _load_config(args)
    if not cfg.session.record_transcripts:
        cfg.session.record_transcripts = True
    data, _ = _load_data(cfg, args)
    if isinstance(data, tuple):
        data = data[0]
    out = train_federated(cfg, data)
    result = out.audit
    print(json.dumps({
        "violations": [v._asdict() for v in result.violations],
        "restorations": result.restorations,
    }, indent=2))
    return 1 if result.violations else 0


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssxgb",
        description="Vertically federated XGBoost over additive secret shares")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="session config JSON")
        p.add_argument("--data", help="dataset CSV (overrides config path)")
        p.add_argument("--seed", type=int)
        p.add_argument("--parties", type=int)
        p.add_argument("--backend", choices=["inproc", "tcp"])
        p.add_argument("--trees", type=int)
        p.add_argument("--depth", type=int)
        p.add_argument("--buckets", type=int)
        p.add_argument("--synthetic-n", type=int, dest="synthetic_n")
        p.add_argument("--synthetic-j", type=int, dest="synthetic_j")

    p = sub.add_parser("train", help="run secure training")
    common(p)
    p.add_argument("--out", help="directory for per-party model files")
    p.add_argument("--report", help="write the run report JSON here")
    p.add_argument("--with-oracle", action="store_true", dest="with_oracle",
                   help="also train the centralized reference and diff")
    mask = p.add_mutually_exclusive_group()
    mask.add_argument("--first-layer-mask", dest="first_layer_mask",
                      action="store_true", default=None)
    mask.add_argument("--no-first-layer-mask", dest="first_layer_mask",
                      action="store_false", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="cooperative inference from saved models")
    common(p)
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against labels")
    p.add_argument("--preds", required=True)
    p.add_argument("--labels", required=True, help="CSV containing the label column")
    p.add_argument("--label-column", default="label")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="centralized reference training")
    common(p)
    p.add_argument("--out", help="directory for oracle predictions and tree dump")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="operation-count scaling report")
    p.add_argument("--trees-grid", type=_int_list, default=[1, 2, 3], dest="trees_grid")
    p.add_argument("--depths", type=_int_list, default=[2, 3])
    p.add_argument("--features", type=_int_list, default=[8, 16])
    p.add_argument("--buckets", type=int, default=10)
    p.add_argument("--instances", type=int, default=256)
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--seed", type=int)
    p.add_argument("--table2-only", action="store_true", dest="table2_only")
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("audit", help="train and audit the transcripts")
    common(p)
    mask = p.add_mutually_exclusive_group()
    mask.add_argument("--first-layer-mask", dest="first_layer_mask",
                      action="store_true", default=None)
    mask.add_argument("--no-first-layer-mask", dest="first_layer_mask",
                      action="store_false", default=None)
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("SSXGB_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
