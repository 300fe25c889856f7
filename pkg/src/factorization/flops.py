"""FLOP accounting for the factorization steps."""

import logging
import threading
from typing import Dict

logger = logging.getLogger(__name__)

# Step categories, following the three cost terms of an online iteration
CODE_INPUTS = "code_inputs"
CODE_SOLVE = "code_solve"
SURROGATE = "surrogate"
DICTIONARY = "dictionary"
GRAM = "gram"

CATEGORIES = (CODE_INPUTS, CODE_SOLVE, SURROGATE, DICTIONARY, GRAM)


def matmul_flops(m: int, n: int, k: int) -> int:
    """FLOPs of an (m x k) @ (k x n) product (one multiply and one add per term)."""
    return 2 * m * n * k


def masked_gram_flops(q: int, k: int) -> int:
    """FLOPs of D^T M D computed on the q selected rows."""
    return matmul_flops(k, k, q)


def masked_correlation_flops(q: int, k: int, m: int = 1) -> int:
    """FLOPs of D^T M X for m columns computed on the q selected rows."""
    return matmul_flops(k, m, q)


class FlopCounter:
    """
    Thread-safe FLOP tally, split by step category.

    The B-complement update may run on a worker thread while the
    dictionary update runs on the main thread, so increments are locked.
    """

    def __init__(self):
        """Initialize an empty counter."""
        self._counts: Dict[str, int] = {category: 0 for category in CATEGORIES}
        self._lock = threading.Lock()

    def add(self, category: str, count: int) -> None:
        """
        Add FLOPs to a category.

        Args:
            category: One of CATEGORIES
            count: Number of floating-point operations (>= 0)
        """
        if category not in self._counts:
            raise KeyError(f"Unknown FLOP category: {category}")
        with self._lock:
            self._counts[category] += int(count)

    @property
    def total(self) -> int:
        """Total FLOPs over all categories."""
        with self._lock:
            return sum(self._counts.values())

    def by_category(self) -> Dict[str, int]:
        """Snapshot of the per-category tallies."""
        with self._lock:
            return dict(self._counts)
