"""Subsampling: random row masks and row gather/scatter primitives."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from src.errors import DimensionMismatchError, DomainError

logger = logging.getLogger(__name__)

# Bit generator behind every random stream: Philox-4x64, counter based
BIT_GENERATOR = "Philox"

STREAM_NAMES: Tuple[str, ...] = ("init", "order", "mask", "atoms")


@dataclass(frozen=True)
class Mask:
    """
    One iteration's random row selection.

    Row i is observed (weight r) when it appears in `selected`, frozen
    otherwise. The projector P_t keeps the selected rows; its complement
    keeps the others.

    Attributes:
        selected: Strictly increasing row indices in [0, p)
        reduction: Reduction factor r >= 1
        p: Total number of rows
    """

    selected: np.ndarray
    reduction: float
    p: int

    def __post_init__(self):
        selected = np.array(self.selected, dtype=np.int64)
        if self.reduction < 1.0:
            raise DomainError(f"Reduction factor must be >= 1, got {self.reduction}")
        if selected.ndim != 1:
            raise DimensionMismatchError("Mask indices must be a 1-d array")
        if selected.size:
            if selected[0] < 0 or selected[-1] >= self.p:
                raise DomainError(f"Mask indices must lie in [0, {self.p})")
            if selected.size > 1 and np.any(np.diff(selected) <= 0):
                raise DomainError("Mask indices must be strictly increasing")
        selected.setflags(write=False)
        object.__setattr__(self, "selected", selected)

    @classmethod
    def full(cls, p: int) -> "Mask":
        """Mask selecting every row (the OMF case, r = 1)."""
        return cls(np.arange(p, dtype=np.int64), 1.0, p)

    @property
    def q(self) -> int:
        """Number of selected rows."""
        return int(self.selected.size)

    @property
    def is_full(self) -> bool:
        return self.q == self.p

    @property
    def is_empty(self) -> bool:
        return self.q == 0

    def complement(self) -> "Mask":
        """Mask selecting exactly the rows this mask leaves out."""
        keep = np.ones(self.p, dtype=bool)
        keep[self.selected] = False
        return Mask(np.flatnonzero(keep), self.reduction, self.p)


@dataclass
class RngState:
    """
    A named, single-owner random stream.

    Attributes:
        seed: Root seed of the run
        name: Sub-stream name
        generator: numpy Generator over a Philox bit generator
    """

    seed: int
    name: str
    generator: np.random.Generator = field(repr=False)

    @property
    def position(self) -> Dict:
        """Counter state of the underlying bit generator."""
        return self.generator.bit_generator.state


def make_streams(seed: int) -> Dict[str, RngState]:
    """
    Create the independent random sub-streams of one run.

    Identical seeds yield identical streams; each named stream is spawned
    from the same SeedSequence so they never overlap.

    Args:
        seed: 64-bit unsigned root seed

    Returns:
        Dict mapping stream name ('init', 'order', 'mask', 'atoms') to RngState
    """
    if seed < 0 or seed >= 2 ** 64:
        raise DomainError(f"Seed must be a 64-bit unsigned integer, got {seed}")
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {
        name: RngState(seed, name, np.random.Generator(np.random.Philox(child)))
        for name, child in zip(STREAM_NAMES, children)
    }


def draw_mask(p: int, r: float, rng: RngState) -> Mask:
    """
    Draw a Bernoulli row mask: each row kept independently with probability 1/r.

    Args:
        p: Number of rows
        r: Reduction factor (>= 1)
        rng: Mask stream (advanced in place)

    Returns:
        Mask with expected size p / r

    Raises:
        DomainError: If p < 1 or r < 1
    """
    if p < 1:
        raise DomainError(f"Row count must be >= 1, got {p}")
    if r < 1.0:
        raise DomainError(f"Reduction factor must be >= 1, got {r}")
    if r == 1.0:
        return Mask.full(p)
    keep = rng.generator.random(p) < 1.0 / r
    return Mask(np.flatnonzero(keep), float(r), p)


def _check_rows(Y: np.ndarray, mask: Mask, name: str) -> None:
    if Y.shape[0] != mask.p:
        raise DimensionMismatchError(
            f"{name} has {Y.shape[0]} rows but the mask covers {mask.p}"
        )


def gather_rows(Y: np.ndarray, mask: Mask) -> np.ndarray:
    """
    Return the rows of Y selected by the mask (P_t Y), unscaled.

    Args:
        Y: Array with p rows
        mask: Row mask

    Returns:
        Array with mask.q rows, in index order
    """
    _check_rows(Y, mask, "Y")
    return Y[mask.selected]


def scatter_rows(target: np.ndarray, mask: Mask, source: np.ndarray) -> np.ndarray:
    """
    Write source into the rows of target selected by the mask, in place.

    Args:
        target: Array with p rows (modified)
        mask: Row mask
        source: Array with mask.q rows

    Returns:
        The updated target
    """
    _check_rows(target, mask, "target")
    if source.shape[0] != mask.q or source.shape[1:] != target.shape[1:]:
        raise DimensionMismatchError(
            f"source has shape {source.shape}, expected ({mask.q}, *{target.shape[1:]})"
        )
    target[mask.selected] = source
    return target
