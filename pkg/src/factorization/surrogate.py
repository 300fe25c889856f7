"""Surrogate: aggregated surrogate parameters, weight schedule and objectives."""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.errors import DimensionMismatchError, DomainError
from src.factorization import flops as flop_terms
from src.factorization.flops import FlopCounter
from src.factorization.proximal import (
    ORACLE_MAX_ITER,
    ORACLE_TOL,
    ElasticNetParams,
    solve_code,
)
from src.factorization.subsampling import Mask

logger = logging.getLogger(__name__)


def weight(t: int, u: float) -> float:
    """
    Surrogate aggregation weight w_t = t^(-u).

    Args:
        t: Iteration number (>= 1)
        u: Decay exponent

    Returns:
        Weight in (0, 1]; exactly 1 at t = 1

    Raises:
        DomainError: If t < 1
    """
    if t < 1:
        raise DomainError(f"Iteration number must be >= 1, got {t}")
    if t == 1:
        return 1.0
    return float(t) ** (-u)


@dataclass
class SurrogateStats:
    """
    Parameters of the aggregated surrogate g_t.

    g_t(D) = 1/2 Tr(D^T D C_bar) - Tr(D^T B_bar) + const_term, where
    const_term is the weighted mean of 1/2 ||x||^2 + lambda * Omega(alpha).

    Attributes:
        B_bar: p x k aggregate of x alpha^T
        C_bar: k x k aggregate of alpha alpha^T
        t: Number of aggregation steps so far
        u: Exponent of the weight sequence
        const_term: Running weighted constant of the surrogate
    """

    B_bar: np.ndarray
    C_bar: np.ndarray
    t: int = 0
    u: float = 0.917
    const_term: float = 0.0

    @classmethod
    def zeros(cls, p: int, k: int, u: float = 0.917) -> "SurrogateStats":
        return cls(np.zeros((p, k)), np.zeros((k, k)), 0, u, 0.0)

    @property
    def p(self) -> int:
        return self.B_bar.shape[0]

    @property
    def k(self) -> int:
        return self.C_bar.shape[0]

    def advance(self) -> float:
        """Increment t and return the weight w_t for this step."""
        self.t += 1
        return weight(self.t, self.u)

    def copy(self) -> "SurrogateStats":
        return SurrogateStats(
            self.B_bar.copy(), self.C_bar.copy(), self.t, self.u, self.const_term
        )


def _check_weight(w: float) -> None:
    if not 0.0 < w <= 1.0:
        raise DomainError(f"Aggregation weight must lie in (0, 1], got {w}")


def _check_batch(stats: SurrogateStats, x_batch: np.ndarray, codes: np.ndarray) -> None:
    if codes.ndim != 2 or codes.shape[0] != stats.k:
        raise DimensionMismatchError(f"codes must be k x eta with k={stats.k}, got {codes.shape}")
    if x_batch.ndim != 2 or x_batch.shape != (stats.p, codes.shape[1]):
        raise DimensionMismatchError(
            f"x_batch must be {stats.p} x {codes.shape[1]}, got {x_batch.shape}"
        )


def _batch_outer_mean(x_rows: np.ndarray, codes: np.ndarray) -> np.ndarray:
    # Elementwise accumulation: every output row is computed identically
    # whichever row subset is passed in, so split updates match full ones bit for bit.
    eta = codes.shape[1]
    acc = x_rows[:, 0:1] * codes[:, 0]
    for col in range(1, eta):
        acc += x_rows[:, col:col + 1] * codes[:, col]
    if eta > 1:
        acc /= eta
    return acc


def update_C(
    stats: SurrogateStats,
    codes: np.ndarray,
    w: float,
    flops: Optional[FlopCounter] = None
) -> SurrogateStats:
    """
    C_bar <- (1 - w) C_bar + w * mean_batch(alpha alpha^T).

    Args:
        stats: Surrogate statistics (updated in place)
        codes: Batch codes (k x eta)
        w: Aggregation weight in (0, 1]
        flops: Optional FLOP counter

    Returns:
        The updated stats
    """
    _check_weight(w)
    if codes.ndim != 2 or codes.shape[0] != stats.k:
        raise DimensionMismatchError(f"codes must be k x eta with k={stats.k}, got {codes.shape}")
    eta = codes.shape[1]
    outer = (codes @ codes.T) / eta
    updated = (1.0 - w) * stats.C_bar + w * outer
    stats.C_bar = 0.5 * (updated + updated.T)
    if flops is not None:
        flops.add(flop_terms.SURROGATE, flop_terms.matmul_flops(stats.k, stats.k, eta))
    return stats


def _update_B_rows(
    stats: SurrogateStats,
    rows: np.ndarray,
    x_batch: np.ndarray,
    codes: np.ndarray,
    w: float,
    flops: Optional[FlopCounter]
) -> SurrogateStats:
    _check_weight(w)
    _check_batch(stats, x_batch, codes)
    if rows.size == 0:
        return stats
    fresh = _batch_outer_mean(x_batch[rows], codes)
    stats.B_bar[rows] = (1.0 - w) * stats.B_bar[rows] + w * fresh
    if flops is not None:
        flops.add(flop_terms.SURROGATE, flop_terms.matmul_flops(rows.size, stats.k, codes.shape[1]))
    return stats


def update_B_selected(
    stats: SurrogateStats,
    mask: Mask,
    x_batch: np.ndarray,
    codes: np.ndarray,
    w: float,
    flops: Optional[FlopCounter] = None
) -> SurrogateStats:
    """
    P_t B_bar <- (1 - w) P_t B_bar + w * P_t mean_batch(x alpha^T).

    Only the selected rows are touched (cost proportional to q k eta).

    Args:
        stats: Surrogate statistics (updated in place)
        mask: Row mask of the iteration
        x_batch: Batch columns (p x eta)
        codes: Batch codes (k x eta)
        w: Aggregation weight
        flops: Optional FLOP counter

    Returns:
        The updated stats
    """
    return _update_B_rows(stats, mask.selected, x_batch, codes, w, flops)


def update_B_complement(
    stats: SurrogateStats,
    mask: Mask,
    x_batch: np.ndarray,
    codes: np.ndarray,
    w: float,
    flops: Optional[FlopCounter] = None
) -> SurrogateStats:
    """
    Mirror of update_B_selected on the rows the mask leaves out.

    Writes a row set disjoint from update_B_selected and from the
    dictionary update, so it may run on a separate thread.
    """
    if mask.is_full:
        _check_weight(w)
        _check_batch(stats, x_batch, codes)
        return stats
    return _update_B_rows(stats, mask.complement().selected, x_batch, codes, w, flops)


def update_B_full(
    stats: SurrogateStats,
    x_batch: np.ndarray,
    codes: np.ndarray,
    w: float,
    flops: Optional[FlopCounter] = None
) -> SurrogateStats:
    """Unmasked rule B_bar <- (1 - w) B_bar + w * mean_batch(x alpha^T)."""
    return _update_B_rows(stats, np.arange(stats.p), x_batch, codes, w, flops)


def update_constant(
    stats: SurrogateStats,
    x_batch: np.ndarray,
    codes: np.ndarray,
    params: ElasticNetParams,
    w: float
) -> SurrogateStats:
    """
    Aggregate the alpha-dependent constant of the surrogate.

    const <- (1 - w) const + w * mean_batch(1/2 ||x||^2 + lambda * Omega(alpha)).
    """
    _check_weight(w)
    eta = codes.shape[1]
    fresh = 0.5 * float(np.sum(x_batch * x_batch)) / eta
    fresh += sum(params.penalty(codes[:, col]) for col in range(eta)) / eta
    stats.const_term = (1.0 - w) * stats.const_term + w * fresh
    return stats


def surrogate_value(stats: SurrogateStats, D: np.ndarray, const_term: float = 0.0) -> float:
    """
    Evaluate 1/2 Tr(D^T D C_bar) - Tr(D^T B_bar) + const_term.

    Args:
        stats: Surrogate statistics
        D: Dictionary (p x k)
        const_term: Additive constant (pass stats.const_term for the true value)

    Returns:
        Surrogate value
    """
    if D.shape != stats.B_bar.shape:
        raise DimensionMismatchError(f"D has shape {D.shape}, expected {stats.B_bar.shape}")
    gram = D.T @ D
    return float(0.5 * np.sum(gram * stats.C_bar) - np.sum(D * stats.B_bar) + const_term)


def sample_loss(x: np.ndarray, D: np.ndarray, alpha: np.ndarray, params: ElasticNetParams) -> float:
    """Return 1/2 ||x - D alpha||^2 + lambda * Omega(alpha)."""
    residual = x - D @ alpha
    return float(0.5 * np.dot(residual, residual) + params.penalty(alpha))


def empirical_objective(
    X_test: np.ndarray,
    D: np.ndarray,
    params: ElasticNetParams,
    tol: float = ORACLE_TOL,
    max_iter: int = ORACLE_MAX_ITER
) -> float:
    """
    Mean over columns of min_alpha 1/2 ||x - D alpha||^2 + lambda * Omega(alpha).

    Args:
        X_test: Held-out columns (p x m)
        D: Dictionary (p x k)
        params: Penalty parameters
        tol: Code solver tolerance (reference-grade by default)
        max_iter: Code solver sweep cap

    Returns:
        Empirical risk on X_test
    """
    if X_test.shape[0] != D.shape[0]:
        raise DimensionMismatchError(
            f"X_test has {X_test.shape[0]} rows, dictionary has {D.shape[0]}"
        )
    m = X_test.shape[1]
    if m == 0:
        raise DomainError("empirical_objective needs at least one column")
    gram = D.T @ D
    correlations = D.T @ X_test
    total = 0.0
    for col in range(m):
        alpha = solve_code(gram, correlations[:, col], params, tol=tol, max_iter=max_iter)
        total += sample_loss(X_test[:, col], D, alpha, params)
    return total / m
