"""Tests for the benchmark commands and the command-line entry point."""

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from src.bench import runner
from src.bench.cli import build_parser, main
from src.bench.metrics import read_metrics
from src.bench.runner import (
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_REFUSED,
    ORACLE_DICTIONARY,
    ORACLE_RESULT,
    cmd_gen,
    cmd_oracle,
    cmd_run,
    cmd_summarize,
)
from src.bench.summary import OMF_LABEL
from src.datasets.matrix import DatasetMatrix
from src.datasets.matrix_io import load_matrix, save_matrix
from src.datasets.patches import write_pgm
from src.engine.driver import CheckpointRecord


@pytest.fixture
def restore_logging():
    """Undo the root logging configuration done by main()."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers[:]:
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()
    for handler in handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(level)


def strip_timing(path):
    rows = []
    for record in read_metrics(path):
        row = record.__dict__.copy()
        row.pop("wall_seconds")
        rows.append(row)
    return rows


@pytest.mark.integration
class TestCmdRun:
    """Test suite for cmd_run."""

    def test_sweep_outputs(self, synthetic_config_file, capsys):
        """Test sweep outputs."""
        assert cmd_run(synthetic_config_file) == EXIT_OK
        out_dir = synthetic_config_file.parent / "out"
        for run_id in ("tiny_omf", "tiny_r4_averaged"):
            records = read_metrics(out_dir / f"{run_id}.jsonl")
            assert [r.iter for r in records] == [0, 5, 10, 15, 20, 25, 30, 32]
            assert all(np.isfinite(r.test_objective) for r in records)
            profile = json.loads((out_dir / f"{run_id}_profile.json").read_text())
            assert profile["n_iter"] == 32
        summary = json.loads((out_dir / "summary.json").read_text())
        labels = {run["run_id"]: run["label"] for run in summary["runs"]}
        assert labels["tiny_omf"] == OMF_LABEL
        assert len(labels) == 2
        assert "tiny_r4_averaged" in capsys.readouterr().out

    def test_deterministic(self, synthetic_config_file):
        """Test deterministic."""
        out_dir = synthetic_config_file.parent / "out"
        assert cmd_run(synthetic_config_file) == EXIT_OK
        first = strip_timing(out_dir / "tiny_r4_averaged.jsonl")
        assert cmd_run(synthetic_config_file) == EXIT_OK
        assert strip_timing(out_dir / "tiny_r4_averaged.jsonl") == first

    def test_parallel_runs_match_sequential(self, synthetic_config_file):
        """Test parallel runs match sequential."""
        out_dir = synthetic_config_file.parent / "out"
        assert cmd_run(synthetic_config_file) == EXIT_OK
        sequential = strip_timing(out_dir / "tiny_omf.jsonl")
        text = synthetic_config_file.read_text() + "parallel_runs = true\n"
        synthetic_config_file.write_text(text)
        assert cmd_run(synthetic_config_file) == EXIT_OK
        assert strip_timing(out_dir / "tiny_omf.jsonl") == sequential

    def test_missing_config(self, temp_dir):
        """Test missing config."""
        assert cmd_run(Path(temp_dir) / "nope.toml") == EXIT_FAILURE

    def test_invalid_config(self, temp_dir):
        """Test invalid config."""
        path = Path(temp_dir) / "bad.toml"
        path.write_text('[dataset]\nsource = "synthetic"\n[fit]\nk = 2\nunknown = 1\n')
        assert cmd_run(path) == EXIT_FAILURE

    def test_runtime_error_keeps_partial_metrics(self, synthetic_config_file, monkeypatch):
        """Test runtime error keeps partial metrics."""
        def failing_fit(X, X_test, cfg, checkpoint_every, callback):
            callback(CheckpointRecord(0, 0.0, 0.0, 0, None, 1.0))
            raise RuntimeError("boom")

        monkeypatch.setattr(runner, "fit", failing_fit)
        assert cmd_run(synthetic_config_file) == EXIT_FAILURE
        records = read_metrics(synthetic_config_file.parent / "out" / "tiny_omf.jsonl")
        assert len(records) == 1

    def test_file_source(self, temp_dir, rng):
        """Test file source."""
        save_matrix(DatasetMatrix(rng.standard_normal((10, 40))), Path(temp_dir) / "x.csv")
        path = Path(temp_dir) / "file.toml"
        path.write_text(
            'name = "f"\noutput_dir = "res"\n[dataset]\nsource = "file"\npath = "x.csv"\n'
            "test_fraction = 0.25\n[fit]\nk = 2\nmax_iter = 6\n"
        )
        assert cmd_run(path) == EXIT_OK
        assert (Path(temp_dir) / "res" / "f_omf.jsonl").exists()

    def test_image_source(self, temp_dir, rng):
        """Test image source."""
        write_pgm(Path(temp_dir) / "img.pgm", rng.integers(0, 256, size=(12, 12)))
        path = Path(temp_dir) / "image.toml"
        path.write_text(
            'name = "img"\noutput_dir = "res"\n[dataset]\nsource = "image"\npath = "img.pgm"\n'
            "center = true\nnormalize = true\ntest_fraction = 0.2\n"
            "[dataset.image]\npatch = [4, 4]\nstride = [2, 2]\n"
            "[fit]\nk = 3\nmax_iter = 8\nreduction = 2\nvariant = \"exact_gram\"\n"
        )
        assert cmd_run(path) == EXIT_OK
        records = read_metrics(Path(temp_dir) / "res" / "img_r2_exact_gram.jsonl")
        assert records[-1].iter == 8


@pytest.mark.integration
class TestCmdOracle:
    """Test suite for cmd_oracle."""

    def test_writes_result(self, synthetic_config_file):
        """Test writes result."""
        assert cmd_oracle(synthetic_config_file) == EXIT_OK
        out_dir = synthetic_config_file.parent / "out"
        payload = json.loads((out_dir / ORACLE_RESULT).read_text())
        trace = payload["trace"]
        assert payload["objective"] == trace[-1]
        assert all(b <= a + 1e-10 * abs(a) for a, b in zip(trace, trace[1:]))
        assert np.isfinite(payload["test_objective"])
        assert load_matrix(out_dir / ORACLE_DICTIONARY).shape == (16, 3)

    def test_refuses_large_instances(self, synthetic_config_file, monkeypatch):
        """Test refuses large instances."""
        monkeypatch.setattr(runner, "ORACLE_SIZE_LIMIT", 10)
        assert cmd_oracle(synthetic_config_file) == EXIT_REFUSED
        assert not (synthetic_config_file.parent / "out" / ORACLE_RESULT).exists()
        assert cmd_oracle(synthetic_config_file, force=True) == EXIT_OK

    def test_missing_config(self, temp_dir):
        """Test missing config."""
        assert cmd_oracle(Path(temp_dir) / "nope.toml") == EXIT_FAILURE


@pytest.mark.integration
class TestCmdSummarize:
    """Test suite for cmd_summarize."""

    def test_summarize_after_run(self, synthetic_config_file, capsys):
        """Test summarize after run."""
        assert cmd_run(synthetic_config_file) == EXIT_OK
        out_dir = synthetic_config_file.parent / "out"
        (out_dir / "summary.json").unlink()
        capsys.readouterr()
        assert cmd_summarize(out_dir) == EXIT_OK
        assert (out_dir / "summary.json").exists()
        assert "Threshold" in capsys.readouterr().out

    def test_empty_directory(self, temp_dir):
        """Test empty directory."""
        assert cmd_summarize(temp_dir) == EXIT_FAILURE


@pytest.mark.integration
class TestCmdGen:
    """Test suite for cmd_gen."""

    def test_generate(self, temp_dir):
        """Test generate."""
        spec = Path(temp_dir) / "spec.toml"
        spec.write_text("[synthetic]\np = 6\nn = 9\ntrue_k = 2\nseed = 3\n")
        output = Path(temp_dir) / "data" / "x.dmat"
        assert cmd_gen(spec, output) == EXIT_OK
        assert load_matrix(output).shape == (6, 9)
        assert load_matrix(Path(temp_dir) / "data" / "x_dictionary.dmat").shape == (6, 2)

    def test_top_level_keys(self, temp_dir):
        """Test top level keys."""
        spec = Path(temp_dir) / "flat.toml"
        spec.write_text("p = 4\nn = 5\ntrue_k = 1\n")
        assert cmd_gen(spec, Path(temp_dir) / "x.csv") == EXIT_OK
        assert load_matrix(Path(temp_dir) / "x_dictionary.csv").shape == (4, 1)

    def test_shipped_spec(self, temp_dir):
        """Test shipped spec."""
        spec = Path(__file__).parent.parent / "configs" / "synthetic_spec.toml"
        assert cmd_gen(spec, Path(temp_dir) / "synthetic.dmat") == EXIT_OK

    @pytest.mark.parametrize("content", ["[synthetic]\np = 4\n", "p = [\n", "p = 4\nn = 5\ntrue_k = 9\n"])
    def test_invalid_spec(self, temp_dir, content):
        """Test invalid spec."""
        spec = Path(temp_dir) / "bad.toml"
        spec.write_text(content)
        assert cmd_gen(spec, Path(temp_dir) / "x.dmat") == EXIT_FAILURE

    def test_missing_spec(self, temp_dir):
        """Test missing spec."""
        assert cmd_gen(Path(temp_dir) / "absent.toml", Path(temp_dir) / "x.dmat") == EXIT_FAILURE


@pytest.mark.integration
class TestMain:
    """Test suite for the argument parser and main()."""

    def test_parser(self):
        """Test parser."""
        args = build_parser().parse_args(["oracle", "c.toml", "--force"])
        assert args.command == "oracle" and args.force

    def test_command_required(self):
        """Test command required."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_gen_requires_output(self):
        """Test gen requires output."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["gen", "spec.toml"])

    def test_main_dispatch(self, temp_dir, restore_logging):
        """Test main dispatch."""
        spec = Path(temp_dir) / "spec.toml"
        spec.write_text("p = 4\nn = 5\ntrue_k = 1\n")
        log_file = Path(temp_dir) / "somf.log"
        code = main(["--log-level", "debug", "--log-file", str(log_file), "gen", str(spec), "-o",
                     str(Path(temp_dir) / "x.dmat")])
        assert code == EXIT_OK
        assert "Generated synthetic" in log_file.read_text()

    def test_main_summarize_failure(self, temp_dir, restore_logging):
        """Test main summarize failure."""
        assert main(["summarize", temp_dir]) == EXIT_FAILURE
