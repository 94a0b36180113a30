"""Single-layer sparse NMF.

Multiplicative updates with annealed half-power penalties on both factors,
a constant-row augmentation that softly enforces the abundance sum-to-one
constraint, and a patience-based stopping rule.  This is the inner loop of
the multilayer solver in :mod:`mlunmix.multilayer`.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import AbundanceMatrix, SignatureMatrix, as_matrix, frobenius_cost, qnorm
from .errors import SolverDivergenceError

# The update rules divide by elementwise x**-1/2 terms of possibly-zero
# entries.  Bases are clamped to POWER_FLOOR before the power and the final
# denominator to DENOM_FLOOR, which keeps zero entries locked at zero
# without producing infinities.
POWER_FLOOR = 1e-9
DENOM_FLOOR = 1e-12


class StopReason(enum.Enum):
    MAX_ITERATIONS = "max_iterations"
    CONVERGED = "converged"


@dataclass(frozen=True)
class LayerConfig:
    """Tunables for one factorization layer.

    ``alpha0`` and ``tau`` define the annealed sparsity weight
    ``alpha0 * exp(-t / tau)`` applied to the signature factor at iteration
    ``t``; the abundance factor gets ``alpha_s_ratio`` times that.  ``delta``
    scales the sum-to-one augmentation row.  Iteration stops after ``t_max``
    rounds or once the cost changes by less than ``epsilon`` for
    ``stop_patience`` consecutive iterations.
    """

    alpha0: float = 0.1
    tau: float = 25.0
    alpha_s_ratio: float = 2.0
    delta: float = 25.0
    t_max: int = 400
    epsilon: float = 1e-4
    stop_patience: int = 10

    def __post_init__(self):
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be nonnegative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.alpha_s_ratio <= 0:
            raise ValueError("alpha_s_ratio must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.stop_patience < 1:
            raise ValueError("stop_patience must be at least 1")


@dataclass(frozen=True, eq=False)
class LayerResult:
    """Factors and diagnostics from one layer."""

    A: SignatureMatrix
    S: AbundanceMatrix
    cost_trace: tuple[float, ...]
    iterations_run: int
    stop_reason: StopReason

    def __post_init__(self):
        if len(self.cost_trace) != self.iterations_run:
            raise ValueError("cost trace length must equal iterations run")


def alpha_schedule(alpha0: float, tau: float, t: int) -> float:
    """Annealed sparsity weight ``alpha0 * exp(-t / tau)`` at iteration ``t``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if alpha0 < 0:
        raise ValueError("alpha0 must be nonnegative")
    if t < 0:
        raise ValueError("iteration index must be nonnegative")
    return float(alpha0) * math.exp(-float(t) / float(tau))


def _penalized(den: np.ndarray, factor: np.ndarray, alpha: float, floor: float) -> np.ndarray:
    if alpha > 0.0:
        den = den + (0.5 * alpha) * np.power(np.maximum(factor, floor), -0.5)
    return np.maximum(den, DENOM_FLOOR)


def _check_update_args(x, a, s, alpha, floor):
    X, A, S = as_matrix(x), as_matrix(a), as_matrix(s)
    if A.shape[1] != S.shape[0]:
        raise ValueError(f"inner dimensions disagree: {A.shape} @ {S.shape}")
    if X.shape != (A.shape[0], S.shape[1]):
        raise ValueError(f"data is {X.shape} but factors give {(A.shape[0], S.shape[1])}")
    if alpha < 0:
        raise ValueError("penalty weight must be nonnegative")
    if floor <= 0:
        raise ValueError("floor must be positive")
    return X, A, S


def update_signatures(x, a, s, alpha_a: float, floor: float = POWER_FLOOR) -> np.ndarray:
    """One multiplicative update of the signature factor.

    ``A <- A .* (X S^T) ./ (A S S^T + alpha_a/2 * A^(-1/2))`` with the
    elementwise power floored as described at module level.  Inputs must be
    nonnegative; zero entries stay zero.
    """
    X, A, S = _check_update_args(x, a, s, alpha_a, floor)
    num = X @ S.T
    den = _penalized(A @ (S @ S.T), A, alpha_a, floor)
    return A * num / den


def update_abundances(x, a, s, alpha_s: float, floor: float = POWER_FLOOR) -> np.ndarray:
    """One multiplicative update of the abundance factor.

    Mirror of :func:`update_signatures` with the roles swapped:
    ``S <- S .* (A^T X) ./ (A^T A S + alpha_s/2 * S^(-1/2))``.
    """
    X, A, S = _check_update_args(x, a, s, alpha_s, floor)
    num = A.T @ X
    den = _penalized((A.T @ A) @ S, S, alpha_s, floor)
    return S * num / den


def fcls_augment(x, a, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Append a constant ``delta`` row to both the data and the signatures.

    Least-squares fits against the augmented pair softly pull every
    abundance column sum toward one; ``delta`` controls how hard.
    """
    X, A = as_matrix(x), as_matrix(a)
    delta = float(delta)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    x_aug = np.vstack([X, np.full((1, X.shape[1]), delta)])
    a_aug = np.vstack([A, np.full((1, A.shape[1]), delta)])
    return x_aug, a_aug


def layer_cost(x, a, s, alpha_a: float, alpha_s: float) -> float:
    """Reconstruction cost plus weighted half-power penalties on both factors."""
    if alpha_a < 0 or alpha_s < 0:
        raise ValueError("penalty weights must be nonnegative")
    cost = frobenius_cost(x, a, s)
    if alpha_a > 0:
        cost += alpha_a * qnorm(a, 0.5)
    if alpha_s > 0:
        cost += alpha_s * qnorm(s, 0.5)
    return cost


def check_stop(cost_new: float, cost_old: float, epsilon: float) -> bool:
    """True when the cost change is strictly below ``epsilon``."""
    return abs(cost_new - cost_old) < epsilon


def run_layer(x, a0, s0, cfg: LayerConfig) -> LayerResult:
    """Iterate both updates from ``(a0, s0)`` until convergence or ``t_max``.

    Each iteration updates the signatures against the plain data, then the
    abundances against the delta-augmented data, and records the cost of the
    unaugmented quantities under the current annealing weights.  The
    augmented matrices are per-iteration temporaries; they never accumulate.

    Raises :class:`SolverDivergenceError` if a factor leaves the finite
    range, naming the iteration.
    """
    X = as_matrix(x)
    A = as_matrix(a0).copy()
    S = as_matrix(s0).copy()
    if A.shape[1] != S.shape[0] or X.shape != (A.shape[0], S.shape[1]):
        raise ValueError(
            f"shape chain broken: data {X.shape}, factors {A.shape} @ {S.shape}"
        )
    for arr, what in ((X, "data"), (A, "initial signatures"), (S, "initial abundances")):
        if (arr < 0).any():
            raise ValueError(f"{what} must be nonnegative")

    delta_row = np.full((1, X.shape[1]), float(cfg.delta))
    x_aug = np.vstack([X, delta_row])

    trace: list[float] = []
    prev: float | None = None
    streak = 0
    reason = StopReason.MAX_ITERATIONS
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, cfg.t_max + 1):
            alpha_a = alpha_schedule(cfg.alpha0, cfg.tau, t)
            alpha_s = cfg.alpha_s_ratio * alpha_a
            A = update_signatures(X, A, S, alpha_a)
            a_aug = np.vstack([A, np.full((1, A.shape[1]), float(cfg.delta))])
            S = update_abundances(x_aug, a_aug, S, alpha_s)
            if not (np.isfinite(A).all() and np.isfinite(S).all()):
                raise SolverDivergenceError(
                    f"non-finite factor entries at iteration {t}", iteration=t
                )
            cost = layer_cost(X, A, S, alpha_a, alpha_s)
            if not math.isfinite(cost):
                raise SolverDivergenceError(
                    f"non-finite cost at iteration {t}", iteration=t
                )
            trace.append(cost)
            if prev is not None and check_stop(cost, prev, cfg.epsilon):
                streak += 1
            else:
                streak = 0
            prev = cost
            if streak >= cfg.stop_patience:
                reason = StopReason.CONVERGED
                break
    return LayerResult(
        A=SignatureMatrix(A),
        S=AbundanceMatrix(S),
        cost_trace=tuple(trace),
        iterations_run=len(trace),
        stop_reason=reason,
    )


def estimate_abundances(
    x,
    a,
    delta: float = 25.0,
    t_max: int = 400,
    epsilon: float = 1e-4,
    stop_patience: int = 10,
) -> LayerResult:
    """Estimate abundances for fixed signatures.

    Runs the multiplicative abundance update without a sparsity penalty on
    the delta-augmented system, starting from uniform fractions.  This is
    the abundance half of the classic extract-then-fit baseline.
    """
    X = as_matrix(x)
    A = as_matrix(a)
    if X.shape[0] != A.shape[0]:
        raise ValueError(f"data has {X.shape[0]} bands but signatures {A.shape[0]}")
    p = A.shape[1]
    S = np.full((p, X.shape[1]), 1.0 / p)
    x_aug, a_aug = fcls_augment(X, A, delta)

    trace: list[float] = []
    prev: float | None = None
    streak = 0
    reason = StopReason.MAX_ITERATIONS
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, t_max + 1):
            S = update_abundances(x_aug, a_aug, S, 0.0)
            if not np.isfinite(S).all():
                raise SolverDivergenceError(
                    f"non-finite abundances at iteration {t}", iteration=t
                )
            cost = frobenius_cost(X, A, S)
            trace.append(cost)
            if prev is not None and check_stop(cost, prev, epsilon):
                streak += 1
            else:
                streak = 0
            prev = cost
            if streak >= stop_patience:
                reason = StopReason.CONVERGED
                break
    return LayerResult(
        A=SignatureMatrix(A),
        S=AbundanceMatrix(S),
        cost_trace=tuple(trace),
        iterations_run=len(trace),
        stop_reason=reason,
    )
