"""DatasetMatrix: immutable p x n data matrix with column preprocessing helpers."""

import logging
from typing import Optional

import numpy as np

from src.errors import DomainError, NonFiniteValueError

logger = logging.getLogger(__name__)


class DatasetMatrix:
    """
    Dense p x n matrix of n samples of dimension p, stored column-major.

    Values are validated finite at construction and the underlying array
    is marked read-only, so instances can be shared between runs and threads.
    """

    def __init__(self, values: np.ndarray, name: Optional[str] = None):
        """
        Wrap a 2-d array.

        Args:
            values: p x n array-like of reals
            name: Optional label used in logs

        Raises:
            DomainError: If the array is not 2-d or has an empty dimension
            NonFiniteValueError: If any entry is NaN or infinite
        """
        array = np.array(values, dtype=np.float64, order="F")
        if array.ndim != 2:
            raise DomainError(f"DatasetMatrix needs a 2-d array, got {array.ndim} dimension(s)")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise DomainError(f"DatasetMatrix needs p >= 1 and n >= 1, got {array.shape}")
        if not np.all(np.isfinite(array)):
            bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
            raise NonFiniteValueError(f"Matrix contains {bad} non-finite value(s)")
        array.setflags(write=False)
        self._values = array
        self.name = name

    @property
    def values(self) -> np.ndarray:
        """Read-only p x n array."""
        return self._values

    @property
    def p(self) -> int:
        return self._values.shape[0]

    @property
    def n(self) -> int:
        return self._values.shape[1]

    @property
    def shape(self):
        return self._values.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._values
        return self._values.astype(dtype)

    def columns(self, indices) -> "DatasetMatrix":
        """New DatasetMatrix holding the given columns, in order."""
        return DatasetMatrix(self._values[:, np.asarray(indices, dtype=np.int64)], self.name)

    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"DatasetMatrix{label}(p={self.p}, n={self.n})"


def as_array(X) -> np.ndarray:
    """Return the p x n float array behind a DatasetMatrix or array-like."""
    if isinstance(X, DatasetMatrix):
        return X.values
    return np.asarray(X, dtype=np.float64)


def center_columns(X: DatasetMatrix) -> DatasetMatrix:
    """Subtract each column's mean from its entries."""
    values = X.values - X.values.mean(axis=0, keepdims=True)
    return DatasetMatrix(values, X.name)


def normalize_columns(X: DatasetMatrix) -> DatasetMatrix:
    """
    Scale each column to unit l2 norm.

    Zero columns are left at zero.
    """
    norms = np.linalg.norm(X.values, axis=0)
    zero = norms == 0.0
    if np.any(zero):
        logger.debug(f"{int(zero.sum())} zero column(s) left unnormalized")
    norms[zero] = 1.0
    return DatasetMatrix(X.values / norms, X.name)
