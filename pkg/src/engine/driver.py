"""Driver: the online (OMF) and subsampled online (SOMF) factorization loops."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from src.datasets.matrix import DatasetMatrix, as_array
from src.engine.config import FitConfig
from src.engine.stream import SampleStream
from src.errors import DimensionMismatchError, DomainError, NonFiniteValueError
from src.factorization import flops as flop_terms
from src.factorization.dict_update import (
    DEAD_ATOM_THRESHOLD,
    DictionaryState,
    init_dictionary,
    partial_dictionary_update,
    reinit_atoms,
)
from src.factorization.estimators import EstimatorVariant, SampleCache, compute_batch_code_inputs
from src.factorization.flops import FlopCounter
from src.factorization.proximal import solve_code
from src.factorization.subsampling import Mask, draw_mask, make_streams
from src.factorization.surrogate import (
    SurrogateStats,
    empirical_objective,
    surrogate_value,
    update_B_complement,
    update_B_selected,
    update_C,
    update_constant,
)

logger = logging.getLogger(__name__)

STEP_CODE = "code"
STEP_SURROGATE = "surrogate"
STEP_DICTIONARY = "dictionary"
STEPS = (STEP_CODE, STEP_SURROGATE, STEP_DICTIONARY)

# FLOP categories charged to each step of the timing profile
_STEP_CATEGORIES = {
    STEP_CODE: (flop_terms.CODE_INPUTS, flop_terms.CODE_SOLVE),
    STEP_SURROGATE: (flop_terms.SURROGATE,),
    STEP_DICTIONARY: (flop_terms.DICTIONARY, flop_terms.GRAM),
}


@dataclass
class CheckpointRecord:
    """
    Snapshot of a run at one checkpoint.

    wall_seconds counts training time only; evaluating the test objective
    is excluded.
    """

    iter: int
    epoch: float
    wall_seconds: float
    flops: int
    train_surrogate: Optional[float]
    test_objective: Optional[float]

    def to_dict(self) -> Dict:
        return {
            "iter": self.iter,
            "epoch": self.epoch,
            "wall_seconds": self.wall_seconds,
            "flops": self.flops,
            "train_surrogate": self.train_surrogate,
            "test_objective": self.test_objective,
        }


@dataclass
class FitReport:
    """Outcome of a fit: checkpoints, final dictionary and per-step profiles."""

    config: FitConfig
    state: DictionaryState
    checkpoints: List[CheckpointRecord] = field(default_factory=list)
    step_seconds: Dict[str, float] = field(default_factory=dict)
    flops_by_step: Dict[str, int] = field(default_factory=dict)
    surrogate_trace: List[Tuple[float, float]] = field(default_factory=list)
    n_iter: int = 0

    @property
    def dictionary(self) -> np.ndarray:
        return self.state.D

    @property
    def final_test_objective(self) -> Optional[float]:
        if not self.checkpoints:
            return None
        return self.checkpoints[-1].test_objective


CheckpointCallback = Callable[[CheckpointRecord], None]


def check_matrix(X, name: str) -> np.ndarray:
    """Return the float array behind X, rejecting empty or non-finite input."""
    values = as_array(X)
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise DomainError(f"{name} must be a nonempty 2-d matrix, got shape {values.shape}")
    if not isinstance(X, DatasetMatrix) and not np.all(np.isfinite(values)):
        raise NonFiniteValueError(f"{name} contains NaN or infinite values")
    return values


class OnlineFactorizer:
    """
    Iteration state of one online factorization run.

    Each step draws a mini-batch, computes its codes from (possibly
    subsampled) Gram and correlation estimates, aggregates the surrogate
    and runs one partial dictionary update on the rows of the mask.
    """

    def __init__(self, X, cfg: FitConfig):
        """
        Initialize the run: random streams, dictionary, surrogate and caches.

        Args:
            X: Training data (p x n, DatasetMatrix or array)
            cfg: Fit configuration
        """
        self.X = check_matrix(X, "X")
        self.cfg = cfg
        self.params = cfg.params
        p, n = self.X.shape
        if cfg.k > n:
            raise DomainError(f"k={cfg.k} exceeds the number of samples n={n}")

        self.streams = make_streams(cfg.seed)
        self.state = init_dictionary(
            self.X,
            cfg.k,
            self.streams["init"],
            mu=cfg.mu,
            positive_dict=cfg.positive_dict,
            with_gram=cfg.variant == EstimatorVariant.EXACT_GRAM,
        )
        self.stats = SurrogateStats.zeros(p, cfg.k, cfg.u)
        self.cache: Optional[SampleCache] = None
        if cfg.variant != EstimatorVariant.MASKED:
            self.cache = SampleCache(n, cfg.k, cfg.variant, cfg.v)
        self.stream = SampleStream(n, cfg.batch_size, self.streams["order"])
        self.flops = FlopCounter()
        self.t = 0
        self.train_seconds = 0.0
        self.step_seconds = {step: 0.0 for step in STEPS}
        self.surrogate_trace: List[Tuple[float, float]] = []
        self._executor: Optional[ThreadPoolExecutor] = None
        if cfg.parallel:
            self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="somf-complement")

    @property
    def p(self) -> int:
        return self.X.shape[0]

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def _compute_codes(self, indices: np.ndarray, X_batch: np.ndarray, mask: Mask) -> np.ndarray:
        cfg = self.cfg
        code_mask = mask if cfg.code_subsampling else Mask.full(self.p)
        pairs = compute_batch_code_inputs(
            cfg.variant,
            self.state.D,
            X_batch,
            code_mask,
            self.cache,
            indices.tolist(),
            maintained_gram=self.state.gram,
            flops=self.flops,
        )
        codes = np.empty((cfg.k, len(indices)))
        shuffle_rng = self.streams["atoms"].generator if cfg.shuffle_coordinates else None
        for col, (index, (G, beta)) in enumerate(zip(indices, pairs)):
            warm = self.cache.warm_start(index) if self.cache is not None else None
            alpha, n_sweeps = solve_code(
                G,
                beta,
                self.params,
                warm_start=warm,
                tol=cfg.code_tol,
                max_iter=cfg.code_max_iter,
                shuffle=cfg.shuffle_coordinates,
                rng=shuffle_rng,
                return_n_iter=True,
            )
            self.flops.add(flop_terms.CODE_SOLVE, n_sweeps * 2 * cfg.k * cfg.k)
            if self.cache is not None:
                self.cache.store_code(index, alpha)
            codes[:, col] = alpha
        return codes

    def _update_dictionary(self, mask: Mask, X_batch: np.ndarray, codes: np.ndarray, w: float) -> None:
        order = self.streams["atoms"].generator.permutation(self.cfg.k)
        if self.cfg.track_surrogate:
            # Complement first so the recorded values are both taken on the full g_t
            update_B_complement(self.stats, mask, X_batch, codes, w, self.flops)
            before = surrogate_value(self.stats, self.state.D, self.stats.const_term)
            partial_dictionary_update(
                self.state, mask, self.stats.C_bar, self.stats.B_bar, order, self.flops
            )
            after = surrogate_value(self.stats, self.state.D, self.stats.const_term)
            self.surrogate_trace.append((before, after))
        elif self._executor is not None and not mask.is_full:
            future = self._executor.submit(
                update_B_complement, self.stats, mask, X_batch, codes, w, self.flops
            )
            partial_dictionary_update(
                self.state, mask, self.stats.C_bar, self.stats.B_bar, order, self.flops
            )
            future.result()
        else:
            partial_dictionary_update(
                self.state, mask, self.stats.C_bar, self.stats.B_bar, order, self.flops
            )
            update_B_complement(self.stats, mask, X_batch, codes, w, self.flops)

        if self.cfg.reinit_dead_atoms:
            dead = np.flatnonzero(np.diag(self.stats.C_bar) < DEAD_ATOM_THRESHOLD)
            if dead.size:
                reinit_atoms(self.state, dead.tolist(), self.X, self.streams["atoms"])

    def step(self) -> Mask:
        """
        Run one iteration.

        Returns:
            The mask drawn for this iteration
        """
        started = time.perf_counter()
        cfg = self.cfg
        reduction = cfg.reduction_at(self.stream.epoch)
        indices = self.stream.next_batch()
        X_batch = self.X[:, indices]
        mask = draw_mask(self.p, reduction, self.streams["mask"])
        logger.debug(f"Iteration {self.t + 1}: {mask.q}/{self.p} rows, batch {indices.tolist()}")

        codes = self._compute_codes(indices, X_batch, mask)
        after_codes = time.perf_counter()

        w = self.stats.advance()
        update_C(self.stats, codes, w, self.flops)
        update_B_selected(self.stats, mask, X_batch, codes, w, self.flops)
        update_constant(self.stats, X_batch, codes, self.params, w)
        after_surrogate = time.perf_counter()

        self._update_dictionary(mask, X_batch, codes, w)
        finished = time.perf_counter()

        self.t += 1
        self.step_seconds[STEP_CODE] += after_codes - started
        # The B complement is timed with the dictionary step it overlaps
        self.step_seconds[STEP_SURROGATE] += after_surrogate - after_codes
        self.step_seconds[STEP_DICTIONARY] += finished - after_surrogate
        self.train_seconds += finished - started
        return mask

    def checkpoint(self, X_test: Optional[np.ndarray]) -> CheckpointRecord:
        """Record the current iterate, evaluating the test objective when test data is given."""
        train_surrogate = None
        if self.t > 0:
            train_surrogate = surrogate_value(self.stats, self.state.D, self.stats.const_term)
        test_objective = None
        if X_test is not None:
            test_objective = empirical_objective(
                X_test,
                self.state.D,
                self.params,
                tol=self.cfg.oracle_tol,
                max_iter=self.cfg.oracle_max_iter,
            )
            if not np.isfinite(test_objective):
                logger.warning(f"Non-finite test objective at iteration {self.t}")
        return CheckpointRecord(
            iter=self.t,
            epoch=self.stream.epoch,
            wall_seconds=self.train_seconds,
            flops=self.flops.total,
            train_surrogate=train_surrogate,
            test_objective=test_objective,
        )

    def flops_by_step(self) -> Dict[str, int]:
        counts = self.flops.by_category()
        return {
            step: sum(counts[category] for category in categories)
            for step, categories in _STEP_CATEGORIES.items()
        }


def fit(
    X,
    X_test=None,
    cfg: Optional[FitConfig] = None,
    checkpoint_every: Optional[int] = None,
    callback: Optional[CheckpointCallback] = None
) -> FitReport:
    """
    Learn a dictionary from X with the online (OMF) or subsampled (SOMF) loop.

    A checkpoint is recorded before the first iteration, every
    checkpoint_every iterations and after the last one.

    Args:
        X: Training data (p x n)
        X_test: Optional held-out data scored at each checkpoint
        cfg: Fit configuration
        checkpoint_every: Iterations between checkpoints (only the end when None)
        callback: Called with each CheckpointRecord as it is produced

    Returns:
        FitReport with checkpoints and the final dictionary state

    Raises:
        NonFiniteValueError: If X contains NaN or infinite values
        DomainError: On invalid configuration
    """
    if cfg is None:
        raise DomainError("fit needs a FitConfig")
    if checkpoint_every is not None and checkpoint_every < 1:
        raise DomainError(f"checkpoint_every must be >= 1, got {checkpoint_every}")

    factorizer = OnlineFactorizer(X, cfg)
    test_values = None
    if X_test is not None:
        test_values = check_matrix(X_test, "X_test")
        if test_values.shape[0] != factorizer.p:
            raise DimensionMismatchError(
                f"X_test has {test_values.shape[0]} rows, X has {factorizer.p}"
            )

    n_iter = cfg.total_iterations(factorizer.X.shape[1])
    logger.info(
        f"Starting {cfg.algorithm.value.upper()} fit: p={factorizer.p}, n={factorizer.X.shape[1]}, "
        f"k={cfg.k}, r={cfg.reduction}, variant={cfg.variant.value}, {n_iter} iterations"
    )

    report = FitReport(config=cfg, state=factorizer.state)

    def record() -> None:
        checkpoint = factorizer.checkpoint(test_values)
        report.checkpoints.append(checkpoint)
        if callback is not None:
            callback(checkpoint)
        logger.info(
            f"Checkpoint iter={checkpoint.iter} epoch={checkpoint.epoch:.2f} "
            f"flops={checkpoint.flops} test_objective={checkpoint.test_objective}"
        )

    try:
        record()
        for _ in range(n_iter):
            factorizer.step()
            if checkpoint_every is not None and factorizer.t % checkpoint_every == 0:
                record()
        if report.checkpoints[-1].iter != factorizer.t:
            record()
    finally:
        factorizer.close()

    report.step_seconds = dict(factorizer.step_seconds)
    report.flops_by_step = factorizer.flops_by_step()
    report.surrogate_trace = list(factorizer.surrogate_trace)
    report.n_iter = factorizer.t
    logger.info(
        f"Fit finished after {factorizer.t} iterations in {factorizer.train_seconds:.2f}s "
        f"({factorizer.flops.total} FLOPs)"
    )
    return report
