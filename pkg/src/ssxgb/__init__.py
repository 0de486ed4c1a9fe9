"""Multi-party vertical federated XGBoost over additive secret shares."""

from .config import DatasetSpec, HyperParams, RunConfig, SessionConfig
from .data import PartitionedData, ingest, synthetic_partition
from .oracle import CentralizedBooster
from .session import (TrainOutput, compare_with_oracle, merged_structure,
                      oracle_for, predict_federated, train_federated)

__version__ = "0.1.0"

__all__ = [
    "CentralizedBooster",
    "DatasetSpec",
    "HyperParams",
    "PartitionedData",
    "RunConfig",
    "SessionConfig",
    "TrainOutput",
    "compare_with_oracle",
    "ingest",
    "merged_structure",
    "oracle_for",
    "predict_federated",
    "synthetic_partition",
    "train_federated",
    "__version__",
]
