"""Synthetic data: sparse low-rank matrices X = D A + noise with known factors."""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.datasets.matrix import DatasetMatrix
from src.errors import DomainError
from src.factorization.proximal import enet_projection

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Recipe for a synthetic factorization instance.

    Attributes:
        p: Number of rows (features)
        n: Number of columns (samples)
        true_k: Number of atoms of the generating dictionary
        noise_sigma: Standard deviation of the additive Gaussian noise
        dict_sparsity: Fraction of zero entries per generating atom, in [0, 1]
        code_sparsity: Fraction of zero entries per generating code, in [0, 1]
        nonnegative: Clip both factors at zero and use |Gaussian| noise
        seed: Root seed of the generator
        mu: Mix of the elastic-net ball the atoms are projected onto
        redundancy: Each row of an underlying p / redundancy signal is repeated this many times
    """

    p: int
    n: int
    true_k: int
    noise_sigma: float = 0.0
    dict_sparsity: float = 0.0
    code_sparsity: float = 0.0
    nonnegative: bool = False
    seed: int = 0
    mu: float = 1.0
    redundancy: int = 1

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise DomainError(f"p and n must be >= 1, got p={self.p}, n={self.n}")
        if not 1 <= self.true_k <= min(self.p, self.n):
            raise DomainError(
                f"true_k must lie in [1, min(p, n)={min(self.p, self.n)}], got {self.true_k}"
            )
        if not self.noise_sigma >= 0.0:
            raise DomainError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        for name in ("dict_sparsity", "code_sparsity", "mu"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if self.redundancy < 1 or self.p % self.redundancy != 0:
            raise DomainError(f"redundancy must be >= 1 and divide p={self.p}, got {self.redundancy}")
        if self.true_k > self.p // self.redundancy:
            raise DomainError(
                f"true_k={self.true_k} exceeds the underlying dimension {self.p // self.redundancy}"
            )

    @property
    def base_dimension(self) -> int:
        return self.p // self.redundancy


def _sparsify(factor: np.ndarray, sparsity: float, rng: np.random.Generator) -> np.ndarray:
    # Zero a fixed number of entries per column, always keeping at least one
    rows, cols = factor.shape
    n_zero = min(int(round(sparsity * rows)), rows - 1)
    if n_zero == 0:
        return factor
    for j in range(cols):
        factor[rng.choice(rows, size=n_zero, replace=False), j] = 0.0
    return factor


def generate_synthetic(spec: SyntheticSpec) -> Tuple[DatasetMatrix, np.ndarray, np.ndarray]:
    """
    Draw a synthetic instance from a spec.

    Args:
        spec: Instance recipe

    Returns:
        (X, D_true (p x true_k), A_true (true_k x n)); identical for identical specs
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.seed)))

    base = rng.standard_normal((spec.base_dimension, spec.true_k))
    base = _sparsify(base, spec.dict_sparsity, rng)
    if spec.nonnegative:
        base = np.maximum(base, 0.0)
    dictionary = np.repeat(base, spec.redundancy, axis=0)
    for j in range(spec.true_k):
        dictionary[:, j] = enet_projection(dictionary[:, j], 1.0, spec.mu, spec.nonnegative)

    codes = rng.standard_normal((spec.true_k, spec.n))
    codes = _sparsify(codes, spec.code_sparsity, rng)
    if spec.nonnegative:
        codes = np.maximum(codes, 0.0)

    values = dictionary @ codes
    if spec.noise_sigma > 0.0:
        noise = rng.standard_normal((spec.p, spec.n))
        if spec.nonnegative:
            noise = np.abs(noise)
        values += spec.noise_sigma * noise

    logger.info(
        f"Generated synthetic {spec.p}x{spec.n} instance "
        f"(true_k={spec.true_k}, sigma={spec.noise_sigma}, redundancy={spec.redundancy})"
    )
    return DatasetMatrix(values, name=f"synthetic-{spec.seed}"), dictionary, codes
