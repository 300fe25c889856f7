"""Engine: configuration, sample stream and outer loops of the factorization."""

from src.engine.config import Algorithm, FitConfig
from src.engine.stream import SampleStream
from src.engine.driver import CheckpointRecord, FitReport, OnlineFactorizer, fit
from src.engine.oracle import OracleResult, alternate_minimization_oracle

__all__ = [
    "Algorithm",
    "FitConfig",
    "SampleStream",
    "CheckpointRecord",
    "FitReport",
    "OnlineFactorizer",
    "fit",
    "OracleResult",
    "alternate_minimization_oracle"
]
