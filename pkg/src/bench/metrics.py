"""Metrics: per-checkpoint records streamed to line-delimited JSON files."""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Union

from src.engine.driver import CheckpointRecord
from src.errors import DatasetFormatError

logger = logging.getLogger(__name__)

METRICS_SUFFIX = ".jsonl"


@dataclass
class MetricRecord:
    """One checkpoint of one run, as written to the metrics file."""

    run_id: str
    algorithm: str
    r: float
    variant: str
    iter: int
    epoch: float
    wall_seconds: float
    flops: int
    test_objective: Optional[float]
    train_surrogate: Optional[float] = None

    @classmethod
    def from_checkpoint(
        cls,
        run_id: str,
        algorithm: str,
        r: float,
        variant: str,
        checkpoint: CheckpointRecord
    ) -> "MetricRecord":
        return cls(
            run_id=run_id,
            algorithm=algorithm,
            r=r,
            variant=variant,
            iter=checkpoint.iter,
            epoch=checkpoint.epoch,
            wall_seconds=checkpoint.wall_seconds,
            flops=checkpoint.flops,
            test_objective=checkpoint.test_objective,
            train_surrogate=checkpoint.train_surrogate,
        )


class MetricsWriter:
    """
    Append-only writer of one run's metrics file.

    Every record is flushed as soon as it is written, so the file stays
    parseable up to the last complete line if the process dies.
    """

    def __init__(self, path: Union[str, Path]):
        """
        Open (and truncate) the metrics file of a run.

        Args:
            path: Destination .jsonl file
        """
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, "w", encoding="utf-8")
        self.count = 0

    def write(self, record: MetricRecord) -> None:
        self._handle.write(json.dumps(asdict(record)) + "\n")
        self._handle.flush()
        self.count += 1

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()
            logger.debug(f"Closed {self.path} after {self.count} record(s)")

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def read_metrics(path: Union[str, Path]) -> List[MetricRecord]:
    """
    Read a metrics file, ignoring a truncated final line.

    Raises:
        DatasetFormatError: If a line other than the last is not a valid record
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(MetricRecord(**json.loads(line)))
        except (json.JSONDecodeError, TypeError) as e:
            if number == len(lines):
                logger.warning(f"{path}: ignoring truncated last line")
                break
            raise DatasetFormatError(f"{path}:{number}: invalid metric record: {e}") from e
    return records


def find_metrics_files(directory: Union[str, Path]) -> List[Path]:
    """Metrics files of a directory, sorted by name."""
    return sorted(Path(directory).glob(f"*{METRICS_SUFFIX}"))
