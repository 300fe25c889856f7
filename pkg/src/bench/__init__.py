"""Bench: run configs, metric streams, convergence summaries and the CLI."""

from src.bench.run_config import RunConfig, load_run_config
from src.bench.metrics import MetricRecord, MetricsWriter, read_metrics
from src.bench.summary import summarize_runs, write_summary
from src.bench.runner import cmd_run, cmd_oracle, cmd_summarize, cmd_gen

__all__ = [
    "RunConfig",
    "load_run_config",
    "MetricRecord",
    "MetricsWriter",
    "read_metrics",
    "summarize_runs",
    "write_summary",
    "cmd_run",
    "cmd_oracle",
    "cmd_summarize",
    "cmd_gen"
]
