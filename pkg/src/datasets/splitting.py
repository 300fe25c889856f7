"""Train/test splitting of data columns."""

import logging
import math
from typing import Tuple

import numpy as np

from src.datasets.matrix import DatasetMatrix
from src.errors import DomainError

logger = logging.getLogger(__name__)


def train_test_split(
    X: DatasetMatrix,
    test_fraction: float,
    seed: int
) -> Tuple[DatasetMatrix, DatasetMatrix]:
    """
    Split the columns of X into disjoint train and test sets by a seeded shuffle.

    Args:
        X: Data matrix
        test_fraction: Fraction of columns held out, in (0, 1)
        seed: Shuffle seed

    Returns:
        (X_train with n - ceil(n f) columns, X_test with ceil(n f) columns)

    Raises:
        DomainError: If the fraction is out of range or either side would be empty
    """
    if not 0.0 < test_fraction < 1.0:
        raise DomainError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    # Rounded first so 100 * 0.07 counts as 7, not 8
    n_test = math.ceil(round(X.n * test_fraction, 9))
    if n_test < 1 or n_test >= X.n:
        raise DomainError(f"Degenerate split: {n_test} test column(s) out of {X.n}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    order = rng.permutation(X.n)
    X_train = X.columns(np.sort(order[n_test:]))
    X_test = X.columns(np.sort(order[:n_test]))
    logger.debug(f"Split {X.n} columns into {X_train.n} train / {X_test.n} test")
    return X_train, X_test
