"""Perron measure, mean transition kernel and the alpha-idle kernel"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from curvflow.errors import ConvergenceError, DomainError, SingularSystemError
from curvflow.graph_core import (
    DenseMatrix,
    DirectedWeightedGraph,
    as_dense_matrix,
    assert_strongly_connected,
    random_walk_matrix,
)

logger = logging.getLogger(__name__)

POWER_TOLERANCE = 1e-12
"""Sup-norm step size at which power iteration stops"""

MAX_ITERATIONS = 1_000_000
"""Power iteration cap before the dense solve takes over"""

STOCHASTIC_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PerronKernel:
    """Perron measure with the random walk and mean transition kernel built from it"""

    m: np.ndarray
    """Positive probability vector with ``m @ W == m``"""

    W: DenseMatrix
    """Random-walk matrix"""

    mu: DenseMatrix
    """Mean transition kernel. Zero diagonal, rows sum to one"""

    residual: float
    """``max |m @ W - m|``"""

    @property
    def n(self) -> int:
        return self.m.shape[0]

    def edge_measure(self) -> DenseMatrix:
        """``m(x) mu(x, y)``. Symmetric by detailed balance"""
        return self.m[:, None] * self.mu


def _power_iteration(W: DenseMatrix, start: np.ndarray, tolerance: float, max_iterations: int) -> np.ndarray:
    lazy = 0.5 * (np.eye(W.shape[0]) + W)
    m = start / start.sum()
    for _ in range(max_iterations):
        updated = m @ lazy
        if np.max(np.abs(updated - m)) <= tolerance:
            return updated
        m = updated
    raise ConvergenceError(f"power iteration did not converge in {max_iterations} iterations")


def _dense_solve(W: DenseMatrix) -> np.ndarray:
    n = W.shape[0]
    system = (W - np.eye(n)).T
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        m = scipy.linalg.solve(system, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise SingularSystemError("stationarity system is singular; is the support strongly connected?") from e
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise SingularSystemError("stationarity system has no positive solution")
    return m


def perron_measure(
    W: DenseMatrix,
    start: np.ndarray | None = None,
    tolerance: float = POWER_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> tuple[np.ndarray, float]:
    """Left Perron eigenvector of a row-stochastic matrix, normalized to sum one.

    Power iteration runs on the lazy matrix ``(I + W) / 2``, which has the same
    stationary vector and is aperiodic. If it stalls, the linear system
    ``m (W - I) = 0, sum(m) = 1`` is solved directly.

    Args:
        W: Row-stochastic matrix with strongly connected support.
        start: Positive starting vector. Defaults to uniform.
        tolerance: Stop when successive iterates differ by at most this much.
        max_iterations: Iteration cap.

    Returns:
        The Perron measure and its stationarity residual ``max |m W - m|``.

    Raises:
        DomainError: If W is not row-stochastic.
        SingularSystemError: If the fallback solve fails.
    """
    W = as_dense_matrix(W)
    if np.any(W < 0) or np.max(np.abs(W.sum(axis=1) - 1.0)) > STOCHASTIC_TOLERANCE:
        raise DomainError("matrix is not row-stochastic", "spectral")

    n = W.shape[0]
    start = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=np.float64)
    if start.shape != (n,) or np.any(start <= 0):
        raise ValueError("start vector must be positive with one entry per vertex")

    try:
        m = _power_iteration(W, start, tolerance, max_iterations)
    except ConvergenceError as e:
        logger.info(f"{e}; falling back to a dense solve")
        m = _dense_solve(W)

    m = m / m.sum()
    residual = float(np.max(np.abs(m @ W - m)))
    return m, residual


def kernel_from_walk(W: DenseMatrix, m: np.ndarray) -> DenseMatrix:
    """``mu(x, y) = (W(x, y) + m(y) / m(x) W(y, x)) / 2`` with the diagonal zeroed"""
    mu = 0.5 * (W + (m[None, :] / m[:, None]) * W.T)
    np.fill_diagonal(mu, 0.0)
    return mu


def mean_transition_kernel(g: DirectedWeightedGraph) -> PerronKernel:
    """Build the Perron measure and mean transition kernel of a graph.

    Args:
        g: Strongly connected graph.

    Returns:
        The kernel bundle.

    Raises:
        NotStronglyConnectedError: If g has more than one component.
    """
    assert_strongly_connected(g, "spectral")
    W = random_walk_matrix(g)
    m, residual = perron_measure(W)
    return PerronKernel(m=m, W=W, mu=kernel_from_walk(W, m), residual=residual)


def idle_kernel(k: PerronKernel, alpha: float) -> DenseMatrix:
    """Lazy version of mu that stays put with probability ``1 - alpha``.

    Args:
        k: Kernel bundle.
        alpha: Moving probability in (0, 1].

    Returns:
        ``alpha * mu`` off the diagonal and ``1 - alpha`` on it.
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}", "spectral")
    idle = alpha * k.mu
    np.fill_diagonal(idle, 1.0 - alpha)
    return idle
