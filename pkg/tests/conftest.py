"""Pytest configuration and shared fixtures."""

import pytest
import tempfile
import shutil
from pathlib import Path
import sys

import numpy as np

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.datasets.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def rng():
    """Seeded generator for test data."""
    return np.random.default_rng(12345)


@pytest.fixture
def small_matrix(rng):
    """Random 20 x 50 data matrix."""
    return rng.standard_normal((20, 50))


@pytest.fixture
def low_rank_instance():
    """Noisy low-rank synthetic instance (p=30, n=120, true_k=4)."""
    spec = SyntheticSpec(p=30, n=120, true_k=4, noise_sigma=0.01, code_sparsity=0.25, seed=3)
    X, D_true, A_true = generate_synthetic(spec)
    return X, D_true, A_true


@pytest.fixture
def nonnegative_instance():
    """Nonnegative synthetic instance (p=24, n=100, true_k=3)."""
    spec = SyntheticSpec(p=24, n=100, true_k=3, noise_sigma=0.01, nonnegative=True, seed=5)
    X, D_true, A_true = generate_synthetic(spec)
    return X, D_true, A_true


@pytest.fixture
def synthetic_config_file(temp_dir):
    """Small sweep configuration written to a temporary directory."""
    path = Path(temp_dir) / "sweep.toml"
    path.write_text(
        """
name = "tiny"
output_dir = "out"
checkpoint_every = 5

[dataset]
source = "synthetic"
test_fraction = 0.2

[dataset.synthetic]
p = 16
n = 60
true_k = 3
noise_sigma = 0.01
seed = 2

[fit]
k = 3
lambda = 0.05
n_epochs = 2
seed = 4

[sweep]
reductions = [1, 4]
variants = ["averaged"]
"""
    )
    return path
