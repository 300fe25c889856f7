"""Fit configuration: algorithm choice, penalties, schedules and solver settings."""

import dataclasses
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from src.errors import DomainError
from src.factorization.estimators import EstimatorVariant
from src.factorization.proximal import (
    IN_LOOP_MAX_ITER,
    IN_LOOP_TOL,
    ORACLE_MAX_ITER,
    ORACLE_TOL,
    ElasticNetParams,
)

logger = logging.getLogger(__name__)

# Weight exponents used in the reference benchmarks
DEFAULT_U = 0.917
DEFAULT_V = 0.751


class Algorithm(str, Enum):
    """Outer loop flavour."""
    OMF = "omf"
    SOMF = "somf"


@dataclass
class FitConfig:
    """
    Configuration of one online factorization run.

    OMF is the SOMF loop with the reduction forced to 1 and the masked
    estimator (exact when every row is observed).
    """

    k: int
    lambda_: float = 0.1
    nu: float = 0.0
    mu: float = 1.0
    positive_code: bool = False
    positive_dict: bool = False
    batch_size: Optional[int] = None
    reduction: float = 1.0
    variant: EstimatorVariant = EstimatorVariant.EXACT_GRAM
    algorithm: Algorithm = Algorithm.SOMF
    u: float = DEFAULT_U
    v: float = DEFAULT_V
    n_epochs: Optional[float] = 1.0
    max_iter: Optional[int] = None
    seed: int = 0
    code_tol: float = IN_LOOP_TOL
    code_max_iter: int = IN_LOOP_MAX_ITER
    oracle_tol: float = ORACLE_TOL
    oracle_max_iter: int = ORACLE_MAX_ITER
    parallel: bool = False
    code_subsampling: bool = True
    final_reduction: Optional[float] = None
    reduction_switch_epoch: Optional[float] = None
    track_surrogate: bool = False
    reinit_dead_atoms: bool = False
    shuffle_coordinates: bool = False

    def __post_init__(self):
        self.variant = EstimatorVariant(self.variant)
        self.algorithm = Algorithm(self.algorithm)
        if self.batch_size is None:
            self.batch_size = self.k

        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.reduction >= 1.0:
            raise DomainError(f"reduction must be >= 1, got {self.reduction}")
        if self.final_reduction is not None and not self.final_reduction >= 1.0:
            raise DomainError(f"final_reduction must be >= 1, got {self.final_reduction}")
        if (self.final_reduction is None) != (self.reduction_switch_epoch is None):
            raise DomainError("final_reduction and reduction_switch_epoch must be set together")
        if self.n_epochs is None and self.max_iter is None:
            raise DomainError("One of n_epochs or max_iter must be set")
        if self.n_epochs is not None and not self.n_epochs > 0:
            raise DomainError(f"n_epochs must be > 0, got {self.n_epochs}")
        if self.max_iter is not None and self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.code_max_iter < 1 or self.oracle_max_iter < 1:
            raise DomainError("Solver iteration caps must be >= 1")
        # Raises DomainError on nu, mu or lambda out of range
        _ = self.params

        if self.algorithm == Algorithm.OMF:
            if self.reduction != 1.0 or self.variant != EstimatorVariant.MASKED:
                logger.debug("OMF: forcing reduction=1 and the masked estimator")
            self.reduction = 1.0
            self.variant = EstimatorVariant.MASKED
            self.final_reduction = None
            self.reduction_switch_epoch = None

        self._check_weight_exponents()

    def _check_weight_exponents(self) -> None:
        if not 11.0 / 12.0 < self.u < 1.0:
            logger.warning(f"Weight exponent u={self.u} outside (11/12, 1)")
        if self.variant != EstimatorVariant.MASKED and not 0.75 < self.v < 3.0 * self.u - 2.0:
            logger.warning(f"Weight exponent v={self.v} outside (3/4, 3u - 2 = {3.0 * self.u - 2.0:.3f})")

    @property
    def params(self) -> ElasticNetParams:
        return ElasticNetParams(
            nu=self.nu,
            mu=self.mu,
            lambda_=self.lambda_,
            positive_code=self.positive_code,
            positive_dict=self.positive_dict,
        )

    def total_iterations(self, n: int) -> int:
        """Number of iterations of a run on n samples."""
        if self.max_iter is not None:
            return self.max_iter
        return max(1, math.ceil(self.n_epochs * n / self.batch_size))

    def reduction_at(self, epoch: float) -> float:
        """Reduction factor in effect at a (fractional) epoch."""
        if self.final_reduction is not None and epoch >= self.reduction_switch_epoch:
            return self.final_reduction
        return self.reduction

    def replace(self, **changes) -> "FitConfig":
        return dataclasses.replace(self, **changes)
