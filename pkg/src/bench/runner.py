"""Runner: the run, oracle, summarize and gen commands."""

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from src.bench.metrics import METRICS_SUFFIX, MetricRecord, MetricsWriter, find_metrics_files, read_metrics
from src.bench.run_config import (
    SOURCE_FILE,
    SOURCE_IMAGE,
    SOURCE_SYNTHETIC,
    DatasetSource,
    RunConfig,
    load_run_config,
    parse_synthetic,
)
from src.bench.summary import format_summary, summarize_runs, write_summary
from src.datasets.matrix import DatasetMatrix, center_columns, normalize_columns
from src.datasets.matrix_io import load_matrix, save_matrix
from src.datasets.patches import extract_patches, read_pgm
from src.datasets.splitting import train_test_split
from src.datasets.synthetic import generate_synthetic
from src.engine.driver import FitReport, fit
from src.engine.oracle import alternate_minimization_oracle
from src.errors import ConfigError, SomfError
from src.factorization.estimators import EstimatorVariant
from src.factorization.surrogate import empirical_objective
from src.settings import get_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_REFUSED = 2

# Above this many entries the oracle needs an explicit force flag
ORACLE_SIZE_LIMIT = 10 ** 6

ORACLE_RESULT = "oracle.json"
ORACLE_DICTIONARY = "oracle_dictionary.dmat"


def load_dataset(source: DatasetSource) -> Tuple[DatasetMatrix, DatasetMatrix]:
    """
    Build, preprocess and split the dataset of a run config.

    Returns:
        (X_train, X_test)
    """
    if source.source == SOURCE_SYNTHETIC:
        X, _, _ = generate_synthetic(source.synthetic)
    elif source.source == SOURCE_FILE:
        X = load_matrix(source.path, source.format)
    elif source.source == SOURCE_IMAGE:
        X = extract_patches(read_pgm(source.path), source.patch, source.stride)
    else:
        raise ConfigError(f"Unknown dataset source: {source.source}")
    if source.center:
        X = center_columns(X)
    if source.normalize:
        X = normalize_columns(X)
    return train_test_split(X, source.test_fraction, source.split_seed)


def run_id_for(config: RunConfig, reduction: float, variant: EstimatorVariant) -> str:
    if reduction == 1.0:
        return f"{config.name}_omf"
    return f"{config.name}_r{reduction:g}_{EstimatorVariant(variant).value}"


def _write_profile(path: Path, report: FitReport) -> None:
    payload = {
        "n_iter": report.n_iter,
        "step_seconds": report.step_seconds,
        "flops_by_step": report.flops_by_step,
        "surrogate_trace": [list(pair) for pair in report.surrogate_trace],
    }
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")


def execute_run(
    config: RunConfig,
    reduction: float,
    variant: EstimatorVariant,
    X_train: DatasetMatrix,
    X_test: DatasetMatrix
) -> FitReport:
    """
    Fit one (reduction, variant) entry of a sweep, streaming its metrics file.

    Metrics written before a failure stay on disk.
    """
    cfg = config.fit_config(reduction, variant)
    run_id = run_id_for(config, reduction, variant)
    metrics_path = config.output_dir / f"{run_id}{METRICS_SUFFIX}"
    logger.info(f"Run {run_id}: writing metrics to {metrics_path}")

    with MetricsWriter(metrics_path) as writer:
        def on_checkpoint(checkpoint) -> None:
            writer.write(
                MetricRecord.from_checkpoint(
                    run_id, cfg.algorithm.value, cfg.reduction, cfg.variant.value, checkpoint
                )
            )

        report = fit(X_train, X_test, cfg, config.checkpoint_every, on_checkpoint)

    _write_profile(config.output_dir / f"{run_id}_profile.json", report)
    return report


def run_sweep(config: RunConfig) -> Dict[str, FitReport]:
    """
    Run every (reduction, variant) entry of a config on the same data and seed.

    Returns:
        FitReport per run id, in sweep order
    """
    X_train, X_test = load_dataset(config.dataset)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    combinations = config.combinations()
    logger.info(f"Sweep '{config.name}': {len(combinations)} run(s) on {X_train.p}x{X_train.n} data")

    if config.parallel_runs and len(combinations) > 1:
        workers = max(1, min(get_settings().threads, len(combinations)))
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="somf-run") as executor:
            futures = [
                executor.submit(execute_run, config, reduction, variant, X_train, X_test)
                for reduction, variant in combinations
            ]
            reports = [future.result() for future in futures]
    else:
        reports = [
            execute_run(config, reduction, variant, X_train, X_test)
            for reduction, variant in combinations
        ]

    return {
        run_id_for(config, reduction, variant): report
        for (reduction, variant), report in zip(combinations, reports)
    }


def _collect_metrics(paths: List[Path]) -> Dict[str, List[MetricRecord]]:
    runs: Dict[str, List[MetricRecord]] = {}
    for path in paths:
        records = read_metrics(path)
        if records:
            runs[records[0].run_id] = records
        else:
            logger.warning(f"{path}: no metric records")
    return runs


def cmd_run(config_path: Union[str, Path]) -> int:
    """
    Run a benchmark sweep and summarize it.

    Returns:
        0 on success, 1 on configuration or runtime errors
    """
    try:
        config = load_run_config(config_path)
    except SomfError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_FAILURE

    try:
        reports = run_sweep(config)
    except Exception as e:
        logger.error(f"Run failed: {e}")
        return EXIT_FAILURE

    paths = [config.output_dir / f"{run_id}{METRICS_SUFFIX}" for run_id in reports]
    summary = summarize_runs(_collect_metrics(paths))
    write_summary(summary, config.output_dir)
    print(format_summary(summary), end="")
    return EXIT_OK


def cmd_oracle(config_path: Union[str, Path], force: bool = False) -> int:
    """
    Run the alternate-minimization oracle on a config's training data.

    Returns:
        0 on success, 1 on errors, 2 when the instance is too large without force
    """
    try:
        config = load_run_config(config_path)
        X_train, X_test = load_dataset(config.dataset)
        cfg = config.fit_config()
    except SomfError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_FAILURE

    size = X_train.p * X_train.n
    if size > ORACLE_SIZE_LIMIT and not (force or config.oracle_force):
        logger.warning(
            f"Oracle refused: p*n = {size} exceeds {ORACLE_SIZE_LIMIT}; pass --force to run anyway"
        )
        return EXIT_REFUSED

    try:
        result = alternate_minimization_oracle(
            X_train, cfg, outer_tol=config.oracle_outer_tol, max_outer=config.oracle_max_outer
        )
        test_objective = empirical_objective(
            np.asarray(X_test), result.dictionary, cfg.params, cfg.oracle_tol, cfg.oracle_max_iter
        )
    except SomfError as e:
        logger.error(f"Oracle failed: {e}")
        return EXIT_FAILURE

    config.output_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "objective": result.objective,
        "test_objective": test_objective,
        "n_outer": result.n_outer,
        "trace": result.trace,
    }
    result_path = config.output_dir / ORACLE_RESULT
    result_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    save_matrix(DatasetMatrix(result.dictionary, name="oracle"), config.output_dir / ORACLE_DICTIONARY)
    logger.info(f"Oracle objective {result.objective:.8g} (test {test_objective:.8g}) written to {result_path}")
    return EXIT_OK


def cmd_summarize(metrics_dir: Union[str, Path]) -> int:
    """
    Summarize every metrics file of a directory.

    Returns:
        0 on success (runs that never reach the threshold are reported as such), 1 otherwise
    """
    metrics_dir = Path(metrics_dir)
    paths = find_metrics_files(metrics_dir)
    if not paths:
        logger.error(f"No *{METRICS_SUFFIX} files found in {metrics_dir}")
        return EXIT_FAILURE
    try:
        runs = _collect_metrics(paths)
        summary = summarize_runs(runs)
    except SomfError as e:
        logger.error(f"Cannot summarize {metrics_dir}: {e}")
        return EXIT_FAILURE
    write_summary(summary, metrics_dir)
    print(format_summary(summary), end="")
    return EXIT_OK


def cmd_gen(spec_path: Union[str, Path], output: Union[str, Path]) -> int:
    """
    Generate a synthetic dataset from a TOML spec and write it with its true dictionary.

    The spec holds SyntheticSpec fields at top level or in a [synthetic] table.
    The true dictionary goes next to the output as <stem>_dictionary<suffix>.

    Returns:
        0 on success, 1 on errors
    """
    spec_path = Path(spec_path)
    output = Path(output)
    try:
        with open(spec_path, "rb") as handle:
            raw = tomllib.load(handle)
        table = raw.get("synthetic", raw)
        spec = parse_synthetic(table, "synthetic")
        X, D_true, _ = generate_synthetic(spec)
        save_matrix(X, output)
        save_matrix(
            DatasetMatrix(D_true, name="dictionary"),
            output.with_name(f"{output.stem}_dictionary{output.suffix}"),
        )
    except FileNotFoundError:
        logger.error(f"Spec file not found: {spec_path}")
        return EXIT_FAILURE
    except tomllib.TOMLDecodeError as e:
        logger.error(f"{spec_path}: invalid TOML: {e}")
        return EXIT_FAILURE
    except SomfError as e:
        logger.error(f"Cannot generate dataset: {e}")
        return EXIT_FAILURE
    return EXIT_OK
