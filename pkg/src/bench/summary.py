"""Summary: time and FLOPs to reach 1% of the best final test objective."""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from src.bench.metrics import MetricRecord
from src.errors import DomainError

logger = logging.getLogger(__name__)

# Runs are compared at test objective <= THRESHOLD_FACTOR * (best final objective)
THRESHOLD_FACTOR = 1.01

NOT_REACHED = "not reached"
OMF_LABEL = "OMF-equivalent"

SUMMARY_TEXT = "summary.txt"
SUMMARY_JSON = "summary.json"


@dataclass
class RunSummary:
    """Convergence figures of one run of a sweep."""

    run_id: str
    algorithm: str
    r: float
    variant: str
    label: str
    final_objective: Optional[float]
    seconds_to_threshold: Optional[float] = None
    flops_to_threshold: Optional[int] = None
    time_speedup: Optional[float] = None
    flops_speedup: Optional[float] = None

    @property
    def reached(self) -> bool:
        return self.flops_to_threshold is not None


@dataclass
class SweepSummary:
    """Summary table of a sweep."""

    threshold: Optional[float]
    best_final_objective: Optional[float]
    runs: List[RunSummary] = field(default_factory=list)

    def get(self, run_id: str) -> RunSummary:
        for run in self.runs:
            if run.run_id == run_id:
                return run
        raise KeyError(run_id)


def _final_objective(records: Sequence[MetricRecord]) -> Optional[float]:
    for record in reversed(records):
        if record.test_objective is not None:
            return record.test_objective
    return None


def _first_crossing(records: Sequence[MetricRecord], threshold: float) -> Tuple[Optional[float], Optional[int]]:
    for record in records:
        if record.test_objective is not None and record.test_objective <= threshold:
            return record.wall_seconds, record.flops
    return None, None


def _speedup(baseline: Optional[float], value: Optional[float]) -> Optional[float]:
    if baseline is None or value is None:
        return None
    if value == 0:
        return 1.0 if baseline == 0 else float("inf")
    return baseline / value


def summarize_runs(runs: Dict[str, Sequence[MetricRecord]]) -> SweepSummary:
    """
    Compute time-to-threshold and speed-ups for a set of runs.

    The threshold is THRESHOLD_FACTOR times the smallest final test
    objective of the sweep; speed-ups are relative to the r = 1 run, whose
    own speed-up is exactly 1.

    Args:
        runs: Metric records of each run, keyed by run id, in checkpoint order

    Returns:
        SweepSummary (threshold None when no run has a test objective)
    """
    if not runs:
        raise DomainError("Nothing to summarize: no runs")

    finals = {run_id: _final_objective(records) for run_id, records in runs.items()}
    available = [value for value in finals.values() if value is not None]
    best = min(available) if available else None
    threshold = None
    if best is not None:
        threshold = best + (THRESHOLD_FACTOR - 1.0) * abs(best)

    summaries: List[RunSummary] = []
    for run_id, records in runs.items():
        head = records[0] if records else None
        r = head.r if head else float("nan")
        summary = RunSummary(
            run_id=run_id,
            algorithm=head.algorithm if head else "",
            r=r,
            variant=head.variant if head else "",
            label=OMF_LABEL if r == 1.0 else f"SOMF r={r:g}",
            final_objective=finals[run_id],
        )
        if threshold is not None:
            summary.seconds_to_threshold, summary.flops_to_threshold = _first_crossing(records, threshold)
        summaries.append(summary)

    baseline = next((summary for summary in summaries if summary.r == 1.0), None)
    for summary in summaries:
        if baseline is None:
            continue
        if summary is baseline:
            summary.time_speedup = 1.0
            summary.flops_speedup = 1.0
            continue
        summary.time_speedup = _speedup(baseline.seconds_to_threshold, summary.seconds_to_threshold)
        summary.flops_speedup = _speedup(baseline.flops_to_threshold, summary.flops_to_threshold)

    return SweepSummary(threshold=threshold, best_final_objective=best, runs=summaries)


def _cell(value, fmt: str) -> str:
    if value is None:
        return NOT_REACHED
    return format(value, fmt)


def format_summary(summary: SweepSummary) -> str:
    """Render a sweep summary as a plain-text table."""
    lines = []
    if summary.threshold is None:
        lines.append("No test objective recorded; threshold undefined")
    else:
        lines.append(
            f"Threshold: {summary.threshold:.6g} "
            f"({THRESHOLD_FACTOR:g} x best final objective {summary.best_final_objective:.6g})"
        )
    header = f"{'run':<32} {'label':<16} {'variant':<11} {'final':>12} {'seconds':>12} {'flops':>14} {'speedup':>12} {'flop speedup':>13}"
    lines.append(header)
    lines.append("-" * len(header))
    for run in summary.runs:
        final = "n/a" if run.final_objective is None else f"{run.final_objective:.6g}"
        lines.append(
            f"{run.run_id:<32} {run.label:<16} {run.variant:<11} {final:>12} "
            f"{_cell(run.seconds_to_threshold, '.3f'):>12} {_cell(run.flops_to_threshold, 'd'):>14} "
            f"{_cell(run.time_speedup, '.2f'):>12} {_cell(run.flops_speedup, '.2f'):>13}"
        )
    return "\n".join(lines) + "\n"


def write_summary(summary: SweepSummary, directory: Union[str, Path]) -> Tuple[Path, Path]:
    """
    Write the text table and its JSON counterpart to a directory.

    Returns:
        (text path, json path)
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    text_path = directory / SUMMARY_TEXT
    json_path = directory / SUMMARY_JSON
    text_path.write_text(format_summary(summary), encoding="utf-8")

    payload = {
        "threshold": summary.threshold,
        "best_final_objective": summary.best_final_objective,
        "runs": [
            {**asdict(run), "reached": run.reached}
            for run in summary.runs
        ],
    }
    json_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    logger.info(f"Wrote summary to {text_path} and {json_path}")
    return text_path, json_path
