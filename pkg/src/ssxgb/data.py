"""Dataset ingestion, vertical partitioning and synthetic data.

Rows with missing values are rejected outright (with the offending row
list) rather than imputed. Feature ownership is resolved at ingestion:
when a feature is claimed by several parties the lowest index wins and the
duplicates never enter candidate scanning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .config import ConfigError, DatasetSpec


class IngestError(ValueError):
    def __init__(self, message: str, rows: list[int] | None = None):
        super().__init__(message)
        self.rows = rows or []


@dataclass
class PartitionedData:
    """One vertically partitioned dataset split across M parties."""

    m: int
    n: int
    feature_names: list[str]
    owners: list[int]                       # canonical feature -> owning party
    local_cols: dict[int, dict[int, int]]   # party -> {canonical -> local col}
    party_x: dict[int, np.ndarray]          # party -> (N, J_party)
    labels: np.ndarray                      # held by party 1
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.row_ids is None:
            self.row_ids = np.arange(self.n)

    @property
    def j(self) -> int:
        return len(self.feature_names)

    def full_matrix(self) -> np.ndarray:
        """Canonical (N, J) plaintext matrix; test/reference use only."""
        out = np.empty((self.n, self.j))
        for canonical, party in enumerate(self.owners):
            out[:, canonical] = self.party_x[party][:, self.local_cols[party][canonical]]
        return out

    def subset(self, rows: np.ndarray) -> "PartitionedData":
        return PartitionedData(
            self.m, int(np.sum(rows)) if rows.dtype == bool else len(rows),
            self.feature_names, self.owners, self.local_cols,
            {p: x[rows] for p, x in self.party_x.items()},
            self.labels[rows], self.row_ids[rows])


def partition_owners(names: list[str], partition, m: int) -> list[int]:
    """Resolve feature ownership from a fractional plan or explicit map."""
    j = len(names)
    if partition is None:
        partition = [1.0 / m] * m
    if isinstance(partition, dict):
        owners = []
        for name in names:
            claim = partition.get(name)
            if claim is None:
                raise ConfigError(f"feature {name!r} missing from partition map")
            owner = min(claim) if isinstance(claim, (list, tuple)) else int(claim)
            if not 1 <= owner <= m:
                raise ConfigError(f"feature {name!r} assigned to invalid party {owner}")
            owners.append(owner)
        return owners
    fractions = np.asarray(partition, dtype=np.float64)
    if fractions.sum() <= 0:
        raise ConfigError("partition fractions sum to zero")
    fractions = fractions / fractions.sum()
    # largest-remainder apportionment of J columns
    raw = fractions * j
    counts = np.floor(raw).astype(int)
    for idx in np.argsort(-(raw - counts)):
        if counts.sum() >= j:
            break
        counts[idx] += 1
    owners = []
    for party, count in enumerate(counts, start=1):
        owners.extend([party] * count)
    return owners[:j]


def build_partition(x: np.ndarray, names: list[str], owners: list[int],
                    labels: np.ndarray, m: int) -> PartitionedData:
    local_cols: dict[int, dict[int, int]] = {p: {} for p in range(1, m + 1)}
    party_cols: dict[int, list[int]] = {p: [] for p in range(1, m + 1)}
    for canonical, party in enumerate(owners):
        local_cols[party][canonical] = len(party_cols[party])
        party_cols[party].append(canonical)
    party_x = {p: x[:, cols] if cols else np.empty((x.shape[0], 0))
               for p, cols in party_cols.items()}
    return PartitionedData(m, x.shape[0], list(names), list(owners), local_cols,
                           party_x, np.asarray(labels, dtype=np.float64))


def min_max_normalize(train: np.ndarray, test: np.ndarray | None = None):
    """Scale columns to [0, 1] using the training range; constants map to 0."""
    lo = train.min(axis=0)
    span = train.max(axis=0) - lo
    span[span == 0] = 1.0
    norm = lambda a: (a - lo) / span
    return norm(train), (norm(test) if test is not None else None)


def stratified_split(y: np.ndarray, test_fraction: float,
                     rng: np.random.Generator):
    """Seeded train/test row split preserving the class ratio."""
    n = len(y)
    test_idx: list[int] = []
    for cls in np.unique(y):
        rows = np.flatnonzero(y == cls)
        rows = rows[rng.permutation(len(rows))]
        take = int(round(len(rows) * test_fraction))
        test_idx.extend(rows[:take].tolist())
    test_mask = np.zeros(n, dtype=bool)
    test_mask[test_idx] = True
    return ~test_mask, test_mask


def ingest(spec: DatasetSpec, m: int, seed: int):
    """Load, clean, encode, normalize, split and partition a CSV dataset.

    Returns (train: PartitionedData, test: PartitionedData | None).
    """
    frame = pd.read_csv(spec.path)
    if spec.label not in frame.columns:
        raise IngestError(f"label column {spec.label!r} not in {list(frame.columns)}")
    bad_rows = frame.index[frame.isna().any(axis=1)].tolist()
    if bad_rows:
        raise IngestError(f"{len(bad_rows)} rows contain missing values", bad_rows)

    y = frame[spec.label].to_numpy(dtype=np.float64)
    feats = frame.drop(columns=[spec.label])

    encoded_cols: list[str] = []
    arrays: list[np.ndarray] = []
    origin: dict[str, str] = {}  # encoded name -> source column
    for name in feats.columns:
        if name in spec.categorical:
            dummies = pd.get_dummies(feats[name], prefix=name)
            for sub in dummies.columns:
                encoded_cols.append(sub)
                arrays.append(dummies[sub].to_numpy(dtype=np.float64))
                origin[sub] = name
        else:
            try:
                col = feats[name].to_numpy(dtype=np.float64)
            except (TypeError, ValueError):
                raise IngestError(
                    f"column {name!r} is non-numeric; declare it categorical") from None
            encoded_cols.append(name)
            arrays.append(col)
            origin[name] = name
    x = np.column_stack(arrays) if arrays else np.empty((len(frame), 0))

    if isinstance(spec.partition, dict):
        expanded = {sub: spec.partition[origin[sub]] for sub in encoded_cols
                    if origin[sub] in spec.partition}
        missing = [origin[c] for c in encoded_cols if origin[c] not in spec.partition]
        if missing:
            raise ConfigError(f"partition map missing source columns {sorted(set(missing))}")
        owners = partition_owners(encoded_cols, expanded, m)
    else:
        owners = partition_owners(encoded_cols, spec.partition, m)

    rng = np.random.default_rng([seed, 0xDA7A])
    if spec.test_fraction > 0:
        train_mask, test_mask = stratified_split(y, spec.test_fraction, rng)
    else:
        train_mask = np.ones(len(y), dtype=bool)
        test_mask = None

    x_train = x[train_mask]
    x_test = x[test_mask] if test_mask is not None else None
    if spec.normalize and x.shape[1]:
        x_train, x_test = min_max_normalize(x_train, x_test)

    train = build_partition(x_train, encoded_cols, owners, y[train_mask], m)
    train.row_ids = np.flatnonzero(train_mask)
    test = None
    if test_mask is not None:
        test = build_partition(x_test, encoded_cols, owners, y[test_mask], m)
        test.row_ids = np.flatnonzero(test_mask)
    return train, test


def make_synthetic(n: int, j: int, seed: int, *, m: int | None = None,
                   partition=None, loss: str = "logloss"):
    """Seeded synthetic dataset with a smooth nonlinear signal.

    Features are uniform in [0, 1]; the label mixes linear terms, one
    interaction and one bend so shallow trees keep finding useful splits.
    """
    rng = np.random.default_rng([seed, 0x5D])
    x = rng.uniform(0.0, 1.0, size=(n, j))
    weights = rng.normal(0.0, 1.5, size=j)
    logits = x @ weights
    logits += 2.0 * x[:, 0] * x[:, min(1, j - 1)]
    logits += 1.5 * np.abs(x[:, min(2, j - 1)] - 0.5)
    logits -= np.median(logits)
    if loss == "logloss":
        y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-2.0 * logits))).astype(np.float64)
    else:
        y = logits + rng.normal(0.0, 0.1, size=n)
    return x, y


def synthetic_partition(n: int, j: int, m: int, seed: int, *, partition=None,
                        loss: str = "logloss") -> PartitionedData:
    x, y = make_synthetic(n, j, seed, loss=loss)
    names = [f"f{i}" for i in range(j)]
    owners = partition_owners(names, partition, m)
    return build_partition(x, names, owners, y, m)
