"""Sample stream: mini-batches drawn by cycling per-epoch shuffles of the data."""

import logging

import numpy as np

from src.errors import DomainError
from src.factorization.subsampling import RngState

logger = logging.getLogger(__name__)


class SampleStream:
    """
    Endless stream of sample indices.

    Each epoch is a fresh uniform permutation of range(n); batches are
    consecutive slices and may straddle an epoch boundary, so over any run
    every index is drawn either floor or ceil of (iterations * batch_size / n) times.
    """

    def __init__(self, n: int, batch_size: int, rng: RngState):
        """
        Initialize the stream.

        Args:
            n: Number of samples
            batch_size: Indices per batch
            rng: Order stream (advanced once per epoch)
        """
        if n < 1:
            raise DomainError(f"Sample stream needs n >= 1, got {n}")
        if batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {batch_size}")
        self.n = n
        self.batch_size = batch_size
        self.rng = rng
        self.samples_seen = 0
        self.completed_epochs = 0
        self._order = rng.generator.permutation(n)
        self._position = 0

    @property
    def epoch(self) -> float:
        """Fractional number of passes over the data so far."""
        return self.samples_seen / self.n

    def next_batch(self) -> np.ndarray:
        """Return the next batch_size indices."""
        pieces = []
        needed = self.batch_size
        while needed > 0:
            if self._position == self.n:
                self._order = self.rng.generator.permutation(self.n)
                self._position = 0
                self.completed_epochs += 1
                logger.debug(f"Sample stream entering epoch {self.completed_epochs}")
            take = min(needed, self.n - self._position)
            pieces.append(self._order[self._position:self._position + take])
            self._position += take
            needed -= take
        self.samples_seen += self.batch_size
        return np.concatenate(pieces) if len(pieces) > 1 else pieces[0].copy()
