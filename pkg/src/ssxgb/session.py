"""Session orchestration: wiring datasets, parties and programs together."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, RunConfig, topology_hash
from .data import PartitionedData
from .oracle import CentralizedBooster
from .party import run_parties
from .predict import secure_predict
from .sharing import Counters
from .transport import AuditResult, audit_transcripts
from .tree import LEAF, SPLIT, PartyModel, train_program


@dataclass
class TrainOutput:
    cfg: RunConfig
    models: dict[int, PartyModel]
    y_hat: np.ndarray
    counters: dict[int, Counters]
    transcripts: dict
    audit: AuditResult | None
    wall_time: float
    permutation: list[int] = field(default_factory=list)

    def report(self) -> dict:
        rep = {
            "wall_time_s": self.wall_time,
            "mul_counts": self.counters[1].snapshot(),
        }
        if self.audit is not None:
            rep["audit"] = {
                "violations": [v._asdict() for v in self.audit.violations],
                "restorations": self.audit.restorations,
            }
        return rep


def train_federated(cfg: RunConfig, data: PartitionedData, *,
                    backend: str | None = None) -> TrainOutput:
    """Run the full secure training pipeline across party threads."""
    cfg.validate()
    scfg = cfg.session
    if data.m != scfg.parties:
        raise ConfigError(f"dataset partitioned for {data.m} parties, session has {scfg.parties}")
    if cfg.params.first_layer_mask and 1 not in data.owners:
        raise ConfigError("first_layer_mask requires party 1 to own at least one feature")

    def program_for(pid: int):
        labels = data.labels if pid == 1 else None

        def run(party):
            return train_program(party, cfg.params, data.party_x[pid],
                                 data.owners, data.local_cols[pid], labels)

        return run

    started = time.perf_counter()
    run = run_parties(
        scfg.parties, {p: program_for(p) for p in range(1, scfg.parties + 1)},
        seed=scfg.seed, backend=backend or scfg.backend,
        mask_range=scfg.mask_range, triple_batch=scfg.triple_batch,
        feature_count=data.j, record_transcripts=scfg.record_transcripts,
        timeout=scfg.timeout)
    wall = time.perf_counter() - started

    models = {p: run.results[p][0] for p in run.results}
    y_hat = run.results[1][1]
    perm = _session_permutation(scfg.seed, data.j)
    thash = topology_hash(scfg.parties, data.owners, perm, cfg.params, scfg.seed)
    for p, model in models.items():
        model.meta = {
            "topology_hash": thash,
            "permutation": perm,
            "owners": list(data.owners),
            "params": cfg.params.__dict__.copy(),
            "seed": scfg.seed,
            "feature_names": data.feature_names,
        }

    audit = None
    if scfg.record_transcripts:
        audit = audit_transcripts({p: t for p, t in run.transcripts.items()
                                   if t is not None}, scfg.parties)
    return TrainOutput(cfg, models, y_hat, run.counters, run.transcripts, audit,
                       wall, perm)


def _session_permutation(seed: int, feature_count: int) -> list[int]:
    """Replays the coordinator's permutation draw (same seed stream)."""
    from .party import party_rng, COORDINATOR
    return party_rng(seed, COORDINATOR).permutation(feature_count).astype(int).tolist()


def predict_federated(models: dict[int, PartyModel], data: PartitionedData, *,
                      seed: int = 0, backend: str = "inproc",
                      mask_range: float = 1e3, record_transcripts: bool = False,
                      timeout: float = 30.0):
    """Cooperative inference with stored partial trees; scores land on party 1."""
    m = models[1].m

    def program_for(pid: int):
        def run(party):
            return secure_predict(party, models[pid].trees, data.party_x[pid])
        return run

    run = run_parties(m, {p: program_for(p) for p in range(1, m + 1)},
                      seed=seed, backend=backend, mask_range=mask_range,
                      record_transcripts=record_transcripts, timeout=timeout)
    return run.results[1], run


def merged_structure(models: dict[int, PartyModel]) -> list[list[dict]]:
    """Combine the M partial trees into plaintext preorder dumps.

    Test/reference helper: reconstructs leaf weights by summing shares, which
    no single party may do during the protocol.
    """
    parties = sorted(models)

    def merge(nodes: dict[int, object], acc: list) -> list:
        kinds = {nodes[p].kind for p in parties}
        if kinds == {LEAF}:
            weight = float(sum(float(nodes[p].weight.values) for p in parties))
            acc.append({"kind": "leaf", "weight": weight})
            return acc
        splits = [p for p in parties if nodes[p].kind == SPLIT]
        if len(splits) != 1 or LEAF in kinds:
            raise ValueError(f"structural desynchronization: kinds {kinds}")
        owner_node = nodes[splits[0]]
        acc.append({"kind": "split", "feature": owner_node.feature,
                    "bucket": owner_node.bucket, "threshold": owner_node.threshold})
        merge({p: nodes[p].left for p in parties}, acc)
        merge({p: nodes[p].right for p in parties}, acc)
        return acc

    count = len(models[1].trees)
    return [merge({p: models[p].trees[t] for p in parties}, []) for t in range(count)]


def oracle_for(cfg: RunConfig, data: PartitionedData) -> CentralizedBooster:
    """Centralized reference configured identically to a federated session."""
    perm = np.asarray(_session_permutation(cfg.session.seed, data.j))
    return CentralizedBooster(cfg.params, perm, owners=data.owners)


def compare_with_oracle(output: TrainOutput, data: PartitionedData) -> dict:
    """Train the reference on the same plaintext and diff predictions/structure."""
    booster = oracle_for(output.cfg, data)
    booster.fit(data.full_matrix(), data.labels)
    oracle_pred = booster.predict(data.full_matrix())
    fed_dump = merged_structure(output.models)
    oracle_dump = booster.dump()
    structure_match = _dumps_match(fed_dump, oracle_dump)
    return {
        "max_abs_pred_diff": float(np.max(np.abs(output.y_hat - oracle_pred)))
        if len(oracle_pred) else 0.0,
        "trees_match": structure_match,
        "oracle": booster,
    }


def _dumps_match(fed: list[list[dict]], oracle: list[list[dict]],
                 weight_tol: float = 1e-6) -> bool:
    if len(fed) != len(oracle):
        return False
    for ftree, otree in zip(fed, oracle):
        if len(ftree) != len(otree):
            return False
        for fn, on in zip(ftree, otree):
            if fn["kind"] != on["kind"]:
                return False
            if fn["kind"] == "split":
                if (fn["feature"], fn["bucket"]) != (on["feature"], on["bucket"]):
                    return False
                if fn["threshold"] != on["threshold"]:
                    return False
            elif abs(fn["weight"] - on["weight"]) > weight_tol:
                return False
    return True
