"""Proximal: elastic-net penalty, elastic-net ball projection and the code solver."""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from src.errors import DimensionMismatchError, DomainError, SingularityError

logger = logging.getLogger(__name__)

# Code solver tolerances: cheap in-loop solves vs. precise reference solves
IN_LOOP_TOL = 1e-4
IN_LOOP_MAX_ITER = 100
ORACLE_TOL = 1e-8
ORACLE_MAX_ITER = 10_000

# Root-finding tolerance on the projection multiplier
PROJECTION_XTOL = 1e-14


def _check_mix(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class ElasticNetParams:
    """
    Penalty and constraint parameters of the factorization problem.

    Attributes:
        nu: Mix of the code penalty (0 = pure l1, 1 = pure squared l2)
        mu: Mix of the atom constraint (0 = l1 ball, 1 = l2 ball)
        lambda_: Regularization strength applied to the code penalty
        positive_code: Constrain codes to be nonnegative
        positive_dict: Constrain dictionary entries to be nonnegative
    """

    nu: float = 0.0
    mu: float = 1.0
    lambda_: float = 0.1
    positive_code: bool = False
    positive_dict: bool = False

    def __post_init__(self):
        _check_mix(self.nu, "nu")
        _check_mix(self.mu, "mu")
        if not self.lambda_ >= 0.0:
            raise DomainError(f"lambda must be >= 0, got {self.lambda_}")

    def penalty(self, alpha: np.ndarray) -> float:
        """Return lambda * Omega(alpha)."""
        return self.lambda_ * elastic_net_value(alpha, self.nu)


def elastic_net_value(v: np.ndarray, mix: float) -> float:
    """
    Evaluate the elastic-net function (1 - mix) * ||v||_1 + (mix / 2) * ||v||_2^2.

    The same function is the code penalty (mix = nu) and the atom norm
    of the dictionary constraint (mix = mu).

    Args:
        v: Vector (any shape, flattened)
        mix: Mixing parameter in [0, 1]

    Returns:
        Nonnegative scalar value
    """
    flat = np.asarray(v, dtype=np.float64).ravel()
    return float((1.0 - mix) * np.abs(flat).sum() + 0.5 * mix * np.dot(flat, flat))


def _shrink(magnitude: np.ndarray, theta: float, mix: float) -> np.ndarray:
    # Minimizer of ||d - m||^2 / 2 + theta * enet(d) for m >= 0
    return np.maximum(magnitude - theta * (1.0 - mix), 0.0) / (1.0 + theta * mix)


def enet_projection(
    u: np.ndarray,
    radius: float,
    mix: float,
    positive: bool = False
) -> np.ndarray:
    """
    Project u onto the elastic-net ball {d : (1 - mix)||d||_1 + (mix/2)||d||_2^2 <= radius}.

    With positive=True the nonnegative orthant is intersected with the ball.
    The projection is d(theta) = shrink(u, theta) for the smallest multiplier
    theta >= 0 that makes d feasible; theta is found by a bracketed root-find
    and then nudged upward until the constraint holds exactly in floating point.

    Args:
        u: Vector to project
        radius: Ball radius (>= 0)
        mix: Constraint mix in [0, 1]
        positive: Also enforce d >= 0

    Returns:
        Projected vector (a copy of u when u is already feasible)

    Raises:
        DomainError: If radius < 0 or mix outside [0, 1]
    """
    if not np.isfinite(radius) or radius < 0.0:
        raise DomainError(f"Projection radius must be a finite value >= 0, got {radius}")
    _check_mix(mix, "mix")

    u = np.asarray(u, dtype=np.float64)
    if radius == 0.0:
        return np.zeros_like(u)

    if positive:
        magnitude = np.maximum(u, 0.0)
        signs = None
    else:
        magnitude = np.abs(u)
        signs = np.sign(u)

    if elastic_net_value(magnitude, mix) <= radius:
        # theta = 0: only the orthant (if any) was active
        return u.copy() if signs is not None else magnitude

    if mix == 1.0:
        projected = _scale_onto_l2_ball(magnitude, radius)
    else:
        projected = _root_find_projection(magnitude, radius, mix)

    if signs is not None:
        projected = signs * projected
    return projected


def _scale_onto_l2_ball(magnitude: np.ndarray, radius: float) -> np.ndarray:
    scale = np.sqrt(2.0 * radius) / np.sqrt(np.dot(magnitude, magnitude))
    projected = magnitude * scale
    while elastic_net_value(projected, 1.0) > radius:
        scale = np.nextafter(scale, 0.0)
        projected = magnitude * scale
    return projected


def _root_find_projection(magnitude: np.ndarray, radius: float, mix: float) -> np.ndarray:
    def residual(theta: float) -> float:
        return elastic_net_value(_shrink(magnitude, theta, mix), mix) - radius

    # At theta_max every coordinate is shrunk to zero, hence feasible
    theta_max = float(magnitude.max()) / (1.0 - mix)
    theta = brentq(residual, 0.0, theta_max, xtol=PROJECTION_XTOL, maxiter=500)

    projected = _shrink(magnitude, theta, mix)
    step = max(abs(theta) * 4.0 * np.finfo(np.float64).eps, np.finfo(np.float64).tiny)
    while elastic_net_value(projected, mix) > radius:
        theta = min(theta + step, theta_max)
        step *= 2.0
        projected = _shrink(magnitude, theta, mix)
    return projected


def code_objective(
    G: np.ndarray,
    beta: np.ndarray,
    alpha: np.ndarray,
    params: ElasticNetParams
) -> float:
    """Return 1/2 a^T G a - a^T beta + lambda * Omega(a)."""
    return float(0.5 * alpha @ G @ alpha - alpha @ beta + params.penalty(alpha))


def solve_code(
    G: np.ndarray,
    beta: np.ndarray,
    params: ElasticNetParams,
    warm_start: Optional[np.ndarray] = None,
    tol: float = IN_LOOP_TOL,
    max_iter: int = IN_LOOP_MAX_ITER,
    shuffle: bool = False,
    rng: Optional[np.random.Generator] = None,
    return_n_iter: bool = False
) -> Union[np.ndarray, Tuple[np.ndarray, int]]:
    """
    Solve the elastic-net regression min_a 1/2 a^T G a - a^T beta + lambda * Omega(a).

    Cyclic coordinate descent on the quadratic form; each coordinate step is
    an exact minimization, so the objective never increases. Iteration stops
    when the largest coordinate change of a sweep is below tol times the
    largest coefficient magnitude, or after max_iter sweeps.

    Args:
        G: Symmetric k x k matrix with nonnegative diagonal
        beta: Linear term (k,)
        params: Penalty parameters (nu, lambda_, positive_code are used)
        warm_start: Initial code (zeros when None)
        tol: Relative stopping tolerance on coordinate changes
        max_iter: Maximum number of sweeps
        shuffle: Visit coordinates in a fresh random order each sweep
        rng: Generator used when shuffle is True
        return_n_iter: Also return the number of sweeps performed

    Returns:
        The code (k,), or (code, n_sweeps) when return_n_iter is True

    Raises:
        DimensionMismatchError: If G and beta shapes disagree
        SingularityError: If a coordinate has zero curvature and a nonzero pull
    """
    G = np.asarray(G, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    k = beta.shape[0]
    if G.shape != (k, k):
        raise DimensionMismatchError(f"G has shape {G.shape}, expected ({k}, {k})")

    l1 = params.lambda_ * (1.0 - params.nu)
    l2 = params.lambda_ * params.nu
    positive = params.positive_code

    if warm_start is None:
        alpha = np.zeros(k)
    else:
        alpha = np.array(warm_start, dtype=np.float64)
        if alpha.shape != (k,):
            raise DimensionMismatchError(f"warm_start has shape {alpha.shape}, expected ({k},)")
        if positive:
            np.maximum(alpha, 0.0, out=alpha)

    G_alpha = G @ alpha
    curvature = np.diag(G) + l2
    order = np.arange(k)
    if shuffle and rng is None:
        rng = np.random.default_rng()

    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if shuffle:
            order = rng.permutation(k)
        max_delta = 0.0
        max_abs = 0.0
        for j in order:
            old = alpha[j]
            pull = beta[j] - G_alpha[j] + G[j, j] * old
            if positive:
                numerator = pull - l1 if pull > l1 else 0.0
            elif pull > l1:
                numerator = pull - l1
            elif pull < -l1:
                numerator = pull + l1
            else:
                numerator = 0.0

            if curvature[j] <= 0.0:
                if numerator != 0.0:
                    raise SingularityError(
                        f"Coordinate {j} has zero curvature (G[j,j] + lambda*nu = 0) "
                        f"but nonzero linear term {pull}"
                    )
                new = 0.0
            else:
                new = numerator / curvature[j]

            if new != old:
                delta = new - old
                G_alpha += G[:, j] * delta
                alpha[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
            if abs(new) > max_abs:
                max_abs = abs(new)

        if max_delta == 0.0 or max_delta < tol * max_abs:
            break

    if return_n_iter:
        return alpha, n_iter
    return alpha
