"""Estimators: per-sample Gram and correlation estimates fed to the code solver."""

import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import DimensionMismatchError, DomainError, MissingGramError
from src.factorization import flops as flop_terms
from src.factorization.flops import FlopCounter
from src.factorization.subsampling import Mask, gather_rows

logger = logging.getLogger(__name__)


class EstimatorVariant(str, Enum):
    """How (G, beta) are estimated for the code regression."""
    MASKED = "masked"
    AVERAGED = "averaged"
    EXACT_GRAM = "exact_gram"


def gamma_weight(c: int, v: float) -> float:
    """
    Per-sample averaging weight gamma_c = c^(-v).

    Args:
        c: Number of times the sample has been observed (>= 1)
        v: Decay exponent

    Returns:
        Weight in (0, 1]; exactly 1 for c = 1

    Raises:
        DomainError: If c < 1
    """
    if c < 1:
        raise DomainError(f"Observation count must be >= 1, got {c}")
    if c == 1:
        return 1.0
    return float(c) ** (-v)


class SampleCache:
    """
    Per-sample averaged estimators and observation counts.

    Memory depends on the variant: averaged keeps n Gram matrices and n
    correlation vectors, exact-Gram keeps only the n vectors, masked keeps
    nothing beyond the counts. For the averaged variants the last code of
    every sample is kept as a warm start for the next solve.
    """

    def __init__(self, n: int, k: int, variant: EstimatorVariant, v: float = 0.751):
        """
        Initialize a zeroed cache.

        Args:
            n: Number of samples
            k: Number of atoms
            variant: Estimator variant the cache serves
            v: Exponent of the gamma_c weight sequence
        """
        self.n = n
        self.k = k
        self.variant = EstimatorVariant(variant)
        self.v = v
        self.counts = np.zeros(n, dtype=np.int64)
        self.betas: Optional[np.ndarray] = None
        self.grams: Optional[np.ndarray] = None
        self.codes: Optional[np.ndarray] = None
        if self.variant in (EstimatorVariant.AVERAGED, EstimatorVariant.EXACT_GRAM):
            self.betas = np.zeros((n, k))
            self.codes = np.zeros((n, k))
        if self.variant == EstimatorVariant.AVERAGED:
            self.grams = np.zeros((n, k, k))

    def check_index(self, sample_index: int) -> None:
        if not 0 <= sample_index < self.n:
            raise DomainError(f"Sample index {sample_index} out of range [0, {self.n})")

    def observe(self, sample_index: int) -> float:
        """Increment the observation count of a sample and return its gamma weight."""
        self.check_index(sample_index)
        self.counts[sample_index] += 1
        return gamma_weight(int(self.counts[sample_index]), self.v)

    def warm_start(self, sample_index: int) -> Optional[np.ndarray]:
        """Previous code of a sample, or None when the variant keeps no codes."""
        if self.codes is None or self.counts[sample_index] <= 1:
            return None
        return self.codes[sample_index]

    def store_code(self, sample_index: int, code: np.ndarray) -> None:
        if self.codes is not None:
            self.codes[sample_index] = code

    @property
    def nbytes(self) -> int:
        """Bytes held by the estimator arrays (counts and warm starts excluded)."""
        total = 0
        for array in (self.betas, self.grams):
            if array is not None:
                total += array.nbytes
        return total


class CodeEstimator(ABC):
    """Base class for the (G, beta) estimators."""

    # Whether estimate() reads the masked Gram; when False it is neither computed nor charged
    uses_masked_gram = True

    def __init__(self, variant: EstimatorVariant, description: str):
        """
        Initialize an estimator.

        Args:
            variant: Variant tag served by this estimator
            description: One-line description for logs and reports
        """
        self.variant = variant
        self.description = description

    @abstractmethod
    def estimate(
        self,
        masked_gram: np.ndarray,
        masked_betas: np.ndarray,
        cache: Optional[SampleCache],
        sample_indices: Sequence[int],
        maintained_gram: Optional[np.ndarray]
    ) -> List[Tuple[np.ndarray, np.ndarray]]:
        """
        Turn this iteration's masked products into per-sample (G, beta).

        Args:
            masked_gram: D^T M D (k x k), shared by the batch; None when uses_masked_gram is False
            masked_betas: D^T M X for the batch (k x eta)
            cache: Sample cache (required by averaged variants)
            sample_indices: Dataset indices of the batch columns
            maintained_gram: Exact D^T D (exact-Gram variant only)

        Returns:
            One (G, beta) pair per batch column
        """
        pass


class MaskedEstimator(CodeEstimator):
    """Variant (a): unbiased masked products, nothing persisted."""

    def __init__(self):
        super().__init__(EstimatorVariant.MASKED, "masked Gram and masked correlation")

    def estimate(self, masked_gram, masked_betas, cache, sample_indices, maintained_gram):
        return [(masked_gram, masked_betas[:, col].copy()) for col in range(len(sample_indices))]


class AveragedEstimator(CodeEstimator):
    """Variant (b): per-sample running averages of both masked products."""

    def __init__(self):
        super().__init__(EstimatorVariant.AVERAGED, "averaged Gram and averaged correlation")

    def estimate(self, masked_gram, masked_betas, cache, sample_indices, maintained_gram):
        _require_cache(cache, self.variant)
        pairs = []
        for col, index in enumerate(sample_indices):
            gamma = cache.observe(index)
            _average_into(cache.betas, index, masked_betas[:, col], gamma)
            _average_into(cache.grams, index, masked_gram, gamma)
            pairs.append((cache.grams[index].copy(), cache.betas[index].copy()))
        return pairs


class ExactGramEstimator(CodeEstimator):
    """Variant (c): maintained exact Gram matrix, averaged correlation."""

    uses_masked_gram = False

    def __init__(self):
        super().__init__(EstimatorVariant.EXACT_GRAM, "exact Gram and averaged correlation")

    def estimate(self, masked_gram, masked_betas, cache, sample_indices, maintained_gram):
        _require_cache(cache, self.variant)
        if maintained_gram is None:
            raise MissingGramError("The exact-Gram estimator needs a maintained Gram matrix")
        pairs = []
        for col, index in enumerate(sample_indices):
            gamma = cache.observe(index)
            _average_into(cache.betas, index, masked_betas[:, col], gamma)
            pairs.append((maintained_gram, cache.betas[index].copy()))
        return pairs


def _average_into(store: np.ndarray, index: int, fresh: np.ndarray, gamma: float) -> None:
    # gamma_1 = 1 overwrites whatever the slot held
    if gamma == 1.0:
        store[index] = fresh
    else:
        store[index] *= 1.0 - gamma
        store[index] += gamma * fresh


def _require_cache(cache: Optional[SampleCache], variant: EstimatorVariant) -> None:
    if cache is None:
        raise DomainError(f"Estimator variant '{variant.value}' requires a SampleCache")
    if cache.variant != variant:
        raise DomainError(
            f"SampleCache built for '{cache.variant.value}' used with '{variant.value}'"
        )


class EstimatorRegistry:
    """Registry mapping each variant to its estimator."""

    def __init__(self):
        """Initialize empty estimator registry."""
        self._estimators: Dict[EstimatorVariant, CodeEstimator] = {}

    def register(self, estimator: CodeEstimator) -> None:
        """
        Register an estimator in the registry.

        Args:
            estimator: Estimator instance to register
        """
        if estimator.variant in self._estimators:
            logger.warning(f"Estimator '{estimator.variant.value}' already registered, overwriting")
        self._estimators[estimator.variant] = estimator
        logger.debug(f"Registered estimator: {estimator.variant.value}")

    def get(self, variant: EstimatorVariant) -> CodeEstimator:
        """
        Get the estimator for a variant.

        Raises:
            DomainError: If the variant is not registered
        """
        estimator = self._estimators.get(EstimatorVariant(variant))
        if estimator is None:
            available = ", ".join(v.value for v in self._estimators)
            raise DomainError(f"Estimator '{variant}' not found. Available: {available}")
        return estimator

    def has(self, variant: EstimatorVariant) -> bool:
        return EstimatorVariant(variant) in self._estimators

    def list_variants(self) -> List[str]:
        return [variant.value for variant in self._estimators]


def create_default_registry() -> EstimatorRegistry:
    """
    Create an EstimatorRegistry with the three estimators registered.

    Returns:
        EstimatorRegistry instance
    """
    registry = EstimatorRegistry()
    registry.register(MaskedEstimator())
    registry.register(AveragedEstimator())
    registry.register(ExactGramEstimator())
    return registry


_DEFAULT_REGISTRY = create_default_registry()


def masked_products(
    D: np.ndarray,
    X_batch: np.ndarray,
    mask: Mask,
    flops: Optional[FlopCounter] = None,
    need_gram: bool = True
) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """
    Compute D^T M D and D^T M X touching only the selected rows.

    M carries weight r on selected rows, so both products are the
    gathered products scaled by r.

    Args:
        D: Dictionary (p x k)
        X_batch: Batch columns (p x eta)
        mask: Row mask
        flops: Optional counter charged with the product cost
        need_gram: Skip the masked Gram (returned as None) when False

    Returns:
        (masked Gram (k x k) or None, masked correlations (k x eta))
    """
    if X_batch.shape[0] != D.shape[0]:
        raise DimensionMismatchError(
            f"Batch has {X_batch.shape[0]} rows, dictionary has {D.shape[0]}"
        )
    k = D.shape[1]
    if mask.is_full:
        D_sel, X_sel = D, X_batch
    else:
        D_sel = gather_rows(D, mask)
        X_sel = gather_rows(X_batch, mask)
    gram = None
    if need_gram:
        gram = D_sel.T @ D_sel
        gram = 0.5 * (gram + gram.T)
        if mask.reduction != 1.0:
            gram *= mask.reduction
    betas = D_sel.T @ X_sel
    if mask.reduction != 1.0:
        betas *= mask.reduction
    if flops is not None:
        if need_gram:
            flops.add(flop_terms.CODE_INPUTS, flop_terms.masked_gram_flops(mask.q, k))
        flops.add(
            flop_terms.CODE_INPUTS,
            flop_terms.masked_correlation_flops(mask.q, k, X_batch.shape[1])
        )
    return gram, betas


def compute_batch_code_inputs(
    variant: EstimatorVariant,
    D: np.ndarray,
    X_batch: np.ndarray,
    mask: Mask,
    cache: Optional[SampleCache],
    sample_indices: Sequence[int],
    maintained_gram: Optional[np.ndarray] = None,
    flops: Optional[FlopCounter] = None,
    registry: Optional[EstimatorRegistry] = None
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Compute (G, beta) for every column of a mini-batch sharing one mask.

    Args:
        variant: Estimator variant
        D: Dictionary D_{t-1} (p x k)
        X_batch: Batch columns (p x eta)
        mask: This iteration's mask
        cache: Sample cache (variants averaged / exact_gram)
        sample_indices: Dataset index of each batch column
        maintained_gram: Exact Gram matrix (variant exact_gram)
        flops: Optional FLOP counter
        registry: Estimator registry (default registry when None)

    Returns:
        List of (G, beta) pairs, one per batch column
    """
    variant = EstimatorVariant(variant)
    if X_batch.ndim != 2 or X_batch.shape[1] != len(sample_indices):
        raise DimensionMismatchError(
            f"Batch shape {X_batch.shape} does not match {len(sample_indices)} indices"
        )
    if variant == EstimatorVariant.EXACT_GRAM and maintained_gram is None:
        raise MissingGramError("The exact-Gram estimator needs a maintained Gram matrix")
    if cache is not None:
        for index in sample_indices:
            cache.check_index(index)
    estimator = (registry or _DEFAULT_REGISTRY).get(variant)
    gram, betas = masked_products(D, X_batch, mask, flops, need_gram=estimator.uses_masked_gram)
    return estimator.estimate(gram, betas, cache, sample_indices, maintained_gram)


def compute_code_inputs(
    variant: EstimatorVariant,
    D: np.ndarray,
    x_i: np.ndarray,
    mask: Mask,
    cache: Optional[SampleCache],
    sample_index: int,
    maintained_gram: Optional[np.ndarray] = None,
    flops: Optional[FlopCounter] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compute (G, beta) for a single sample.

    Args:
        variant: Estimator variant
        D: Dictionary D_{t-1} (p x k)
        x_i: Sample (p,)
        mask: This iteration's mask
        cache: Sample cache (variants averaged / exact_gram)
        sample_index: Dataset index of the sample
        maintained_gram: Exact Gram matrix (variant exact_gram)
        flops: Optional FLOP counter

    Returns:
        (G (k x k), beta (k,))
    """
    x_column = np.asarray(x_i, dtype=np.float64).reshape(-1, 1)
    return compute_batch_code_inputs(
        variant, D, x_column, mask, cache, [sample_index], maintained_gram, flops
    )[0]
