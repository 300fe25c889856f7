"""Command-line entry point: somf run | oracle | summarize | gen."""

import argparse
import logging
import sys
from typing import List, Optional

from src.bench.runner import cmd_gen, cmd_oracle, cmd_run, cmd_summarize
from src.settings import get_settings

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(level: str, log_file: Optional[str] = None) -> None:
    """Configure root logging once: stdout plus an optional log file."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="somf",
        description="Online and subsampled online matrix factorization benchmarks"
    )
    parser.add_argument(
        "--log-level",
        type=str,
        default=None,
        help="Log level (default: SOMF_LOG_LEVEL or INFO)"
    )
    parser.add_argument(
        "--log-file",
        type=str,
        default=None,
        help="Also write logs to this file"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run every (reduction, variant) combination of a config")
    run.add_argument("config", help="TOML run configuration")

    oracle = commands.add_parser("oracle", help="Run the full-batch alternate-minimization oracle")
    oracle.add_argument("config", help="TOML run configuration")
    oracle.add_argument(
        "--force",
        action="store_true",
        help="Run even when p*n exceeds the size limit"
    )

    summarize = commands.add_parser("summarize", help="Summarize the metrics files of a directory")
    summarize.add_argument("metrics_dir", help="Directory holding *.jsonl metrics files")

    gen = commands.add_parser("gen", help="Write a synthetic dataset from a TOML spec")
    gen.add_argument("spec", help="TOML file with the synthetic spec")
    gen.add_argument(
        "-o", "--output",
        required=True,
        help="Output matrix (.dmat or .csv); the true dictionary is written alongside"
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, configure logging and dispatch to a command.

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging((args.log_level or settings.log_level).upper(), args.log_file)

    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "oracle":
        return cmd_oracle(args.config, force=args.force)
    if args.command == "summarize":
        return cmd_summarize(args.metrics_dir)
    if args.command == "gen":
        return cmd_gen(args.spec, args.output)
    return 1
