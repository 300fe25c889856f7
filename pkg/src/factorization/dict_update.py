"""Dictionary update: projected block coordinate descent over the atoms."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.errors import DimensionMismatchError, DomainError
from src.factorization import flops as flop_terms
from src.factorization.flops import FlopCounter
from src.factorization.proximal import elastic_net_value, enet_projection
from src.factorization.subsampling import Mask, RngState

logger = logging.getLogger(__name__)

# Atoms whose aggregated code energy C_bar[j, j] is below this are left untouched
DEAD_ATOM_THRESHOLD = 1e-12


def atom_norm(d: np.ndarray, mu: float) -> float:
    """Elastic-net atom norm (1 - mu)||d||_1 + (mu/2)||d||_2^2, shared by every radius computation."""
    return elastic_net_value(d, mu)


@dataclass
class DictionaryState:
    """
    Dictionary with its per-atom slack and optional Gram matrix.

    Attributes:
        D: Dictionary (p x k), every atom inside the unit elastic-net ball
        slack: Per-atom slack n_j = 1 - atom_norm(d_j), in [0, 1]
        gram: Maintained D^T D, or None when not maintained
        positive_dict: Whether entries are constrained to be nonnegative
        mu: Mix of the atom constraint
    """

    D: np.ndarray
    slack: np.ndarray
    gram: Optional[np.ndarray] = None
    positive_dict: bool = False
    mu: float = 1.0

    @classmethod
    def from_dictionary(
        cls,
        D: np.ndarray,
        mu: float,
        positive_dict: bool = False,
        with_gram: bool = False
    ) -> "DictionaryState":
        """Build a state from feasible atoms, computing slack and (optionally) the Gram."""
        D = np.array(D, dtype=np.float64, order="F")
        slack = np.array([1.0 - atom_norm(D[:, j], mu) for j in range(D.shape[1])])
        np.clip(slack, 0.0, 1.0, out=slack)
        gram = D.T @ D if with_gram else None
        return cls(D, slack, gram, positive_dict, mu)

    @property
    def p(self) -> int:
        return self.D.shape[0]

    @property
    def k(self) -> int:
        return self.D.shape[1]

    def copy(self) -> "DictionaryState":
        return DictionaryState(
            self.D.copy(),
            self.slack.copy(),
            None if self.gram is None else self.gram.copy(),
            self.positive_dict,
            self.mu,
        )

    def recompute_gram(self) -> None:
        if self.gram is not None:
            self.gram = self.D.T @ self.D

    def max_constraint_violation(self) -> float:
        """Largest amount by which an atom exceeds the unit elastic-net ball (0 when feasible)."""
        norms = [atom_norm(self.D[:, j], self.mu) for j in range(self.k)]
        return max(0.0, max(norms) - 1.0) if norms else 0.0


def _check_inputs(state: DictionaryState, C_bar: np.ndarray, B_bar: np.ndarray, atom_order) -> np.ndarray:
    k = state.k
    if C_bar.shape != (k, k):
        raise DimensionMismatchError(f"C_bar has shape {C_bar.shape}, expected ({k}, {k})")
    if B_bar.shape != state.D.shape:
        raise DimensionMismatchError(f"B_bar has shape {B_bar.shape}, expected {state.D.shape}")
    order = np.asarray(atom_order, dtype=np.int64)
    if order.shape != (k,) or not np.array_equal(np.sort(order), np.arange(k)):
        raise DomainError(f"atom_order must be a permutation of range({k})")
    return order


def partial_dictionary_update(
    state: DictionaryState,
    mask: Mask,
    C_bar: np.ndarray,
    B_bar: np.ndarray,
    atom_order: Sequence[int],
    flops: Optional[FlopCounter] = None
) -> DictionaryState:
    """
    One pass of projected BCD restricted to the rows selected by the mask.

    Each atom's selected rows are moved to the minimizer of the surrogate
    under the constraint that the whole atom stays in the unit ball; rows
    outside the mask are left untouched. The radius of the restricted ball
    is n_j + atom_norm(P d_j), which keeps the bookkeeping exact without
    reading the frozen rows.

    Args:
        state: Dictionary state (updated in place)
        mask: Rows to update
        C_bar: Aggregated k x k code statistic
        B_bar: Aggregated p x k correlation statistic (only selected rows are read)
        atom_order: Order in which atoms are visited
        flops: Optional FLOP counter

    Returns:
        The updated state
    """
    order = _check_inputs(state, C_bar, B_bar, atom_order)
    if mask.p != state.p:
        raise DimensionMismatchError(f"Mask covers {mask.p} rows, dictionary has {state.p}")
    if mask.is_empty:
        return state

    rows = mask.selected
    q, k = mask.q, state.k
    D_sel = state.D[rows]
    B_sel = B_bar[rows]

    if state.gram is not None:
        state.gram -= D_sel.T @ D_sel

    for j in order:
        c_jj = C_bar[j, j]
        if c_jj < DEAD_ATOM_THRESHOLD:
            logger.debug(f"Skipping atom {j}: C_bar[j, j] = {c_jj:.3e}")
            continue
        d_j = D_sel[:, j]
        radius = max(state.slack[j] + atom_norm(d_j, state.mu), 0.0)
        candidate = d_j + (B_sel[:, j] - D_sel @ C_bar[:, j]) / c_jj
        new_atom = enet_projection(candidate, radius, state.mu, state.positive_dict)
        D_sel[:, j] = new_atom
        state.slack[j] = min(max(radius - atom_norm(new_atom, state.mu), 0.0), 1.0)

    state.D[rows] = D_sel

    if state.gram is not None:
        state.gram += D_sel.T @ D_sel
        state.gram = 0.5 * (state.gram + state.gram.T)
        if flops is not None:
            flops.add(flop_terms.GRAM, 2 * flop_terms.matmul_flops(k, k, q))

    if flops is not None:
        flops.add(flop_terms.DICTIONARY, k * (flop_terms.matmul_flops(q, k, 1) + 6 * q))
    return state


def full_dictionary_update(
    state: DictionaryState,
    C_bar: np.ndarray,
    B_bar: np.ndarray,
    atom_order: Sequence[int],
    flops: Optional[FlopCounter] = None
) -> DictionaryState:
    """Projected BCD pass over every row: partial_dictionary_update with the full mask."""
    return partial_dictionary_update(state, Mask.full(state.p), C_bar, B_bar, atom_order, flops)


def _project_columns(columns: np.ndarray, mu: float, positive_dict: bool) -> np.ndarray:
    projected = np.empty_like(columns, dtype=np.float64)
    for j in range(columns.shape[1]):
        column = np.maximum(columns[:, j], 0.0) if positive_dict else columns[:, j]
        projected[:, j] = enet_projection(column, 1.0, mu, positive_dict)
    return projected


def init_dictionary(
    X: np.ndarray,
    k: int,
    rng: RngState,
    mu: float = 1.0,
    positive_dict: bool = False,
    with_gram: bool = False
) -> DictionaryState:
    """
    Initialize the dictionary from k distinct random data columns.

    Args:
        X: Data matrix (p x n)
        k: Number of atoms (<= n)
        rng: Initialization stream
        mu: Mix of the atom constraint
        positive_dict: Clip columns to nonnegative before projecting
        with_gram: Maintain the Gram matrix

    Returns:
        Feasible DictionaryState

    Raises:
        DomainError: If k < 1 or k > n
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    if k < 1 or k > n:
        raise DomainError(f"Number of atoms must lie in [1, n={n}], got {k}")
    chosen = rng.generator.choice(n, size=k, replace=False)
    D = _project_columns(X[:, chosen], mu, positive_dict)
    logger.debug(f"Initialized dictionary from columns {chosen.tolist()}")
    return DictionaryState.from_dictionary(D, mu, positive_dict, with_gram)


def reinit_atoms(
    state: DictionaryState,
    atoms: Sequence[int],
    X: np.ndarray,
    rng: RngState
) -> DictionaryState:
    """
    Replace the given atoms by projected random data columns and refresh the Gram.

    Args:
        state: Dictionary state (updated in place)
        atoms: Atom indices to replace
        X: Data matrix (p x n)
        rng: Stream used to pick replacement columns

    Returns:
        The updated state
    """
    atoms = list(atoms)
    if not atoms:
        return state
    X = np.asarray(X, dtype=np.float64)
    chosen = rng.generator.integers(0, X.shape[1], size=len(atoms))
    replacement = _project_columns(X[:, chosen], state.mu, state.positive_dict)
    for position, j in enumerate(atoms):
        state.D[:, j] = replacement[:, position]
        state.slack[j] = min(max(1.0 - atom_norm(replacement[:, position], state.mu), 0.0), 1.0)
    state.recompute_gram()
    logger.info(f"Reinitialized {len(atoms)} dead atom(s): {atoms}")
    return state
