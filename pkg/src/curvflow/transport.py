"""Exact first Wasserstein distance under an asymmetric distance.

The primal is solved as a min-cost flow between the two supports with the network
simplex in POT. The duals of that flow are extended to a 1-Lipschitz potential on
every vertex, which certifies optimality. :func:`kr_dual_value` solves the dual
linear program directly and is used as an independent oracle.
"""

import logging
from dataclasses import dataclass

import numpy as np
import ot
import scipy.optimize
import scipy.sparse

from curvflow.errors import DimensionError, InfeasibleMarginalsError, LPError
from curvflow.metric import QuasiMetric, as_quasi_metric

logger = logging.getLogger(__name__)

PRUNE_MASS = 1e-12
"""Support entries at or below this mass are dropped before solving"""

MASS_TOLERANCE = 1e-9
"""Largest accepted difference between the total masses of the two measures"""

EMD_MAX_ITERATIONS = 1_000_000

LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
"""HiGHS tolerances shared by every dense LP in the package"""


@dataclass(frozen=True)
class TransportResult:
    """Optimal coupling with its dual certificate"""

    cost: float
    plan: list[tuple[int, int, float]]
    """``(src, dst, mass)``. Mass at ``src`` under the first measure goes to ``dst`` under the second"""
    dual_potentials: np.ndarray
    """1-Lipschitz potential f with ``f[0] == 0``"""
    duality_gap: float
    """``|cost - sum(f * (nu - mu))|``"""

    def marginals(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Row and column marginals of the plan"""
        rows, cols = np.zeros(n), np.zeros(n)
        for src, dst, mass in self.plan:
            rows[src] += mass
            cols[dst] += mass
        return rows, cols


def _validate_measures(mu: np.ndarray, nu: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if mu.shape != (n,) or nu.shape != (n,):
        raise DimensionError(f"measures must have {n} entries, got {mu.shape} and {nu.shape}", "transport")
    if np.any(mu < -PRUNE_MASS) or np.any(nu < -PRUNE_MASS):
        raise InfeasibleMarginalsError("measures must be nonnegative")
    if abs(mu.sum() - nu.sum()) > MASS_TOLERANCE:
        raise InfeasibleMarginalsError(f"total masses differ: {mu.sum()} vs {nu.sum()}")
    if mu.sum() <= PRUNE_MASS:
        raise InfeasibleMarginalsError("measures carry no mass")
    return mu, nu


def lipschitz_system(d: np.ndarray) -> tuple[scipy.sparse.csc_matrix, np.ndarray]:
    """Constraints ``f(b) - f(a) <= d(a, b)`` for every ordered pair ``a != b``.

    Args:
        d: Distance matrix.

    Returns:
        ``A_ub`` and ``b_ub`` in the layout expected by ``scipy.optimize.linprog``.
    """
    n = d.shape[0]
    a, b = np.nonzero(~np.eye(n, dtype=bool))
    rows = np.arange(a.size)
    data = np.concatenate([np.ones(a.size), -np.ones(a.size)])
    A_ub = scipy.sparse.csc_matrix((data, (np.concatenate([rows, rows]), np.concatenate([b, a]))), shape=(a.size, n))
    return A_ub, d[a, b]


def wasserstein1(mu: np.ndarray, nu: np.ndarray, d: QuasiMetric | np.ndarray) -> TransportResult:
    """Minimum cost of moving ``mu`` onto ``nu`` when moving from a to b costs ``d(a, b)``.

    Args:
        mu: Source measure.
        nu: Target measure with the same total mass.
        d: Distance, possibly asymmetric.

    Returns:
        The optimal cost, a plan and a dual potential.

    Raises:
        InfeasibleMarginalsError: If the total masses differ.
        LPError: If the network simplex stops without an optimum.
    """
    metric = as_quasi_metric(d)
    mu, nu = _validate_measures(mu, nu, metric.n)

    sources = np.flatnonzero(mu > PRUNE_MASS)
    targets = np.flatnonzero(nu > PRUNE_MASS)
    a = mu[sources]
    b = nu[targets] * (a.sum() / nu[targets].sum())
    costs = np.ascontiguousarray(metric.d[np.ix_(sources, targets)])

    plan, log = ot.emd(a, b, costs, numItermax=EMD_MAX_ITERATIONS, log=True)
    if log.get("warning") is not None:
        logger.error(f"Network simplex stopped early: {log['warning']}")
        raise LPError(f"network simplex failed: {log['warning']}")

    cost = float(np.sum(plan * costs))

    # Extend the source duals to every vertex; the result is 1-Lipschitz for any d obeying the triangle inequality
    potentials = np.min(metric.d[sources, :] - log["u"][:, None], axis=0)
    potentials -= potentials[0]

    gap = abs(cost - float(potentials @ (nu - mu)))
    rows, cols = np.nonzero(plan > PRUNE_MASS)
    triples = [(int(sources[i]), int(targets[j]), float(plan[i, j])) for i, j in zip(rows, cols)]

    return TransportResult(cost=cost, plan=triples, dual_potentials=potentials, duality_gap=gap)


def kr_dual_value(mu: np.ndarray, nu: np.ndarray, d: QuasiMetric | np.ndarray, anchor: int = 0) -> float:
    """Optimum of ``max sum f (nu - mu)`` over 1-Lipschitz potentials.

    Args:
        mu: Source measure.
        nu: Target measure.
        d: Distance, possibly asymmetric.
        anchor: Vertex whose potential is pinned to zero.

    Returns:
        The dual optimum. Equal to :func:`wasserstein1` cost by strong duality.
    """
    metric = as_quasi_metric(d)
    mu, nu = _validate_measures(mu, nu, metric.n)

    A_ub, b_ub = lipschitz_system(metric.d)
    bounds = [(None, None)] * metric.n
    bounds[anchor] = (0.0, 0.0)

    result = scipy.optimize.linprog(-(nu - mu), A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs", options=LP_OPTIONS)
    if result.status != 0:
        logger.error(f"Dual transport LP failed: {result.message}")
        raise LPError(f"dual LP failed: {result.message}")
    return float(-result.fun)
