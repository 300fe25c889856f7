"""Oracle: full-batch alternate minimization used as a desk-scale reference."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.engine.config import FitConfig
from src.engine.driver import check_matrix
from src.errors import DomainError
from src.factorization.dict_update import DictionaryState, full_dictionary_update, init_dictionary
from src.factorization.proximal import solve_code
from src.factorization.subsampling import make_streams
from src.factorization.surrogate import SurrogateStats, surrogate_value

logger = logging.getLogger(__name__)


@dataclass
class OracleResult:
    """Converged dictionary of the alternate-minimization oracle and its objective trace."""

    state: DictionaryState
    objective: float
    trace: List[float] = field(default_factory=list)
    n_outer: int = 0

    @property
    def dictionary(self) -> np.ndarray:
        return self.state.D


def _exact_codes(X: np.ndarray, state: DictionaryState, cfg: FitConfig, warm: Optional[np.ndarray]) -> np.ndarray:
    params = cfg.params
    gram = state.D.T @ state.D
    correlations = state.D.T @ X
    codes = np.empty((cfg.k, X.shape[1]))
    for col in range(X.shape[1]):
        codes[:, col] = solve_code(
            gram,
            correlations[:, col],
            params,
            warm_start=None if warm is None else warm[:, col],
            tol=cfg.oracle_tol,
            max_iter=cfg.oracle_max_iter,
        )
    return codes


def _full_batch_surrogate(X: np.ndarray, codes: np.ndarray, cfg: FitConfig) -> SurrogateStats:
    n = X.shape[1]
    params = cfg.params
    const = 0.5 * float(np.sum(X * X)) / n
    const += sum(params.penalty(codes[:, col]) for col in range(n)) / n
    return SurrogateStats(
        B_bar=X @ codes.T / n,
        C_bar=codes @ codes.T / n,
        t=1,
        u=cfg.u,
        const_term=const,
    )


def alternate_minimization_oracle(
    X,
    cfg: FitConfig,
    outer_tol: float = 1e-6,
    max_outer: int = 500,
    bcd_tol: float = 1e-12,
    max_bcd_passes: int = 1000
) -> OracleResult:
    """
    Minimize the full empirical risk by alternating exact codes and dictionary BCD.

    Starts from the same dictionary as fit() with the same seed. Each outer
    step solves every code at oracle precision, then runs projected BCD
    passes on the full-batch surrogate until it stalls; the objective trace
    is non-increasing.

    Args:
        X: Data (p x n); keep p * n small
        cfg: Fit configuration (k, penalties, seed and oracle tolerances are used)
        outer_tol: Stop when the relative objective change falls below this
        max_outer: Cap on outer alternations
        bcd_tol: Relative surrogate change that ends the inner BCD passes
        max_bcd_passes: Cap on inner BCD passes per outer step

    Returns:
        OracleResult with the final dictionary state, objective and trace
    """
    if outer_tol <= 0.0:
        raise DomainError(f"outer_tol must be > 0, got {outer_tol}")
    values = check_matrix(X, "X")
    streams = make_streams(cfg.seed)
    state = init_dictionary(
        values, cfg.k, streams["init"], mu=cfg.mu, positive_dict=cfg.positive_dict
    )
    order = np.arange(cfg.k)
    logger.info(f"Starting alternate-minimization oracle: p={values.shape[0]}, n={values.shape[1]}, k={cfg.k}")

    trace: List[float] = []
    codes = None
    n_outer = 0
    for n_outer in range(1, max_outer + 1):
        codes = _exact_codes(values, state, cfg, codes)
        stats = _full_batch_surrogate(values, codes, cfg)
        objective = surrogate_value(stats, state.D, stats.const_term)
        trace.append(objective)
        if len(trace) > 1:
            change = (trace[-2] - objective) / max(abs(trace[-2]), np.finfo(np.float64).tiny)
            logger.debug(f"Oracle step {n_outer}: objective={objective:.10g} change={change:.3e}")
            if change < outer_tol:
                break

        previous = objective
        for _ in range(max_bcd_passes):
            full_dictionary_update(state, stats.C_bar, stats.B_bar, order)
            current = surrogate_value(stats, state.D, stats.const_term)
            if previous - current <= bcd_tol * max(abs(previous), 1.0):
                break
            previous = current
    else:
        logger.warning(f"Oracle stopped at max_outer={max_outer} before reaching outer_tol={outer_tol}")
        # The last BCD passes moved D after the final measurement
        codes = _exact_codes(values, state, cfg, codes)
        stats = _full_batch_surrogate(values, codes, cfg)
        trace.append(surrogate_value(stats, state.D, stats.const_term))

    logger.info(f"Oracle finished after {n_outer} alternations: objective={trace[-1]:.10g}")
    return OracleResult(state=state, objective=trace[-1], trace=trace, n_outer=n_outer)
