"""Configuration objects: training hyperparameters, session settings, dataset spec."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

LOSS_LOGLOSS = "logloss"
LOSS_MSE = "mse"


class ConfigError(ValueError):
    pass


@dataclass
class HyperParams:
    """Booster hyperparameters.

    ``lam`` is the L2 leaf regularizer (must be > 0, the step-size analysis
    of the leaf solver relies on it), ``gamma`` the split penalty,
    ``buckets`` the number of equal-frequency split candidates per feature.
    ``mu`` bounds the total leaf-solver perturbation to ``mu * lam`` and
    ``ratio_floor`` is the conservative convergence ratio used when the
    step-size issuer cannot observe the true gradient sums.
    """

    trees: int = 3
    max_depth: int = 3
    lam: float = 1.0
    gamma: float = 0.5
    buckets: int = 10
    mu: float = 2.0
    eps: float = 1e-6
    ratio_floor: float = 1e-14
    first_layer_mask: bool = False
    loss: str = LOSS_LOGLOSS

    def validate(self) -> None:
        if self.trees < 0:
            raise ConfigError("trees must be >= 0")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.lam <= 0:
            raise ConfigError("lam must be > 0")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if self.buckets < 1:
            raise ConfigError("buckets must be >= 1")
        if self.mu <= 1:
            raise ConfigError("mu must be > 1")
        if self.eps <= 0:
            raise ConfigError("eps must be > 0")
        if self.loss not in (LOSS_LOGLOSS, LOSS_MSE):
            raise ConfigError(f"unknown loss {self.loss!r}")


@dataclass
class SessionConfig:
    """Protocol-session settings shared by all participants."""

    parties: int = 4
    seed: int = 0
    backend: str = "inproc"
    mask_range: float = 1e3
    triple_batch: int = 32
    timeout: float = 30.0
    record_transcripts: bool = True

    def validate(self) -> None:
        if self.parties < 2:
            raise ConfigError("at least 2 parties required")
        if self.backend not in ("inproc", "tcp"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.mask_range <= 0:
            raise ConfigError("mask_range must be > 0")
        if self.triple_batch < 1:
            raise ConfigError("triple_batch must be >= 1")


@dataclass
class DatasetSpec:
    """Where the data comes from and how it is split across parties.

    ``partition`` is either a list of per-party fractions (e.g. the
    0.1/0.2/0.3/0.4 plan) or an explicit ``{feature_name: party}`` map.
    The label column always belongs to party 1.
    """

    path: str = ""
    label: str = "label"
    partition: Any = None
    categorical: list[str] = field(default_factory=list)
    normalize: bool = True
    test_fraction: float = 0.2

    def validate(self, parties: int) -> None:
        if not 0 <= self.test_fraction < 1:
            raise ConfigError("test_fraction must be in [0, 1)")
        if isinstance(self.partition, (list, tuple)):
            if len(self.partition) != parties:
                raise ConfigError("fractional partition length must equal party count")
            if any(f < 0 for f in self.partition):
                raise ConfigError("partition fractions must be >= 0")


@dataclass
class RunConfig:
    session: SessionConfig = field(default_factory=SessionConfig)
    params: HyperParams = field(default_factory=HyperParams)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)

    def validate(self) -> None:
        self.session.validate()
        self.params.validate()
        self.dataset.validate(self.session.parties)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        cfg = cls(
            session=SessionConfig(**d.get("session", {})),
            params=HyperParams(**d.get("params", {})),
            dataset=DatasetSpec(**d.get("dataset", {})),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def topology_hash(parties: int, owners: list[int], permutation: list[int],
                  params: HyperParams, seed: int) -> str:
    """Stable digest identifying one session's topology and parameters.

    Model files from different sessions must not be mixed; the hash makes
    the mismatch detectable at load time.
    """
    blob = json.dumps(
        {
            "parties": parties,
            "owners": list(owners),
            "permutation": list(permutation),
            "params": dataclasses.asdict(params),
            "seed": seed,
        },
        sort_keys=True,
    ).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
