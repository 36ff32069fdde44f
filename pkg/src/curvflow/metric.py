"""Asymmetric all-pairs distances built from reciprocal edge weights.

Three modes are supported. ``epsilon`` masks edges lighter than eps (and non-edges)
with length ``1/eps``. ``limit`` is the eps -> 0 limit, which is computed exactly by
running on support edges only. ``hop`` ignores weights.
"""

import logging
from dataclasses import dataclass
from enum import StrEnum

import networkx as nx
import numpy as np

from curvflow.errors import DomainError
from curvflow.graph_core import DenseMatrix, DirectedWeightedGraph, as_dense_matrix, assert_strongly_connected

logger = logging.getLogger(__name__)

DISTANCE_TOLERANCE = 1e-9
"""Slack used for every comparison between distances"""


class DistanceMode(StrEnum):
    LIMIT = "limit"
    EPSILON = "epsilon"
    HOP = "hop"


@dataclass(frozen=True)
class QuasiMetric:
    """All-pairs distance matrix. Symmetry is not required"""

    d: DenseMatrix
    mode: DistanceMode
    eps: float | None = None
    """Mask threshold, set in ``epsilon`` mode only"""

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def diameter(self) -> float:
        """Largest entry of d"""
        return float(self.d.max())

    def triangle_violation(self) -> float:
        """Largest ``d(x, y) - d(x, z) - d(z, y)`` over all triples. At most zero for a quasi-metric"""
        through = self.d[:, :, None] + self.d[None, :, :]
        return float(np.max(self.d - through.min(axis=1)))


def floyd_warshall(lengths: DenseMatrix) -> DenseMatrix:
    """Shortest-path closure of a dense length matrix. ``inf`` marks a missing edge"""
    d = lengths.copy()
    for k in range(d.shape[0]):
        d = np.minimum(d, d[:, k, None] + d[None, k, :])
    return d


def reciprocal_lengths(g: DirectedWeightedGraph, eps: float) -> DenseMatrix:
    """Epsilon-masked reciprocal edge weights.

    Args:
        g: Graph.
        eps: Mask threshold, positive.

    Returns:
        ``1/omega(x, y)`` where the edge exists with ``omega >= eps``, ``1/eps``
        elsewhere off the diagonal, zero on it.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}", "metric")

    omega = g.weight_matrix()
    lengths = np.full_like(omega, 1.0 / eps)
    kept = omega >= eps
    lengths[kept] = 1.0 / omega[kept]
    np.fill_diagonal(lengths, 0.0)
    return lengths


def shortest_paths(
    lengths: DenseMatrix, mode: DistanceMode | str = DistanceMode.EPSILON, eps: float | None = None
) -> QuasiMetric:
    """All-pairs shortest paths over a dense length matrix.

    Args:
        lengths: Nonnegative lengths with zero diagonal.
        mode: Label recorded on the result.
        eps: Mask threshold recorded on the result.

    Returns:
        The quasi-metric closure.
    """
    lengths = np.asarray(lengths, dtype=np.float64)
    if lengths.ndim != 2 or lengths.shape[0] != lengths.shape[1]:
        raise ValueError(f"expected a square length matrix, got shape {lengths.shape}")
    if np.any(lengths < 0) or np.any(np.diag(lengths) != 0):
        raise DomainError("lengths must be nonnegative with a zero diagonal", "metric")

    return QuasiMetric(d=floyd_warshall(lengths), mode=DistanceMode(mode), eps=eps)


def epsilon_distance(g: DirectedWeightedGraph, eps: float) -> QuasiMetric:
    """Shortest paths over :func:`reciprocal_lengths`"""
    return shortest_paths(reciprocal_lengths(g, eps), DistanceMode.EPSILON, eps)


def limit_distance(g: DirectedWeightedGraph) -> QuasiMetric:
    """Shortest paths over support edges with length ``1/omega``.

    Equal to the epsilon-masked distance for every eps at or below :func:`epsilon_star`.

    Raises:
        NotStronglyConnectedError: If some pair is unreachable.
    """
    assert_strongly_connected(g, "metric")
    omega = g.weight_matrix()
    lengths = np.full_like(omega, np.inf)
    support = omega > 0
    lengths[support] = 1.0 / omega[support]
    np.fill_diagonal(lengths, 0.0)
    return QuasiMetric(d=floyd_warshall(lengths), mode=DistanceMode.LIMIT)


def hop_distance(g: DirectedWeightedGraph) -> QuasiMetric:
    """Breadth-first hop counts ignoring weights.

    Raises:
        NotStronglyConnectedError: If some pair is unreachable.
    """
    assert_strongly_connected(g, "metric")
    d = np.zeros((g.n, g.n))
    for source, lengths in nx.all_pairs_shortest_path_length(g.to_networkx()):
        for target, hops in lengths.items():
            d[source, target] = hops
    return QuasiMetric(d=d, mode=DistanceMode.HOP)


def epsilon_star(g: DirectedWeightedGraph) -> float:
    """Largest mask threshold known to reproduce the limit distance.

    Below the lightest edge every real edge keeps its reciprocal length, and with
    ``1/eps`` at twice the weighted diameter no masked edge can shorten a path.
    """
    lightest = min(w for _, _, w in g.edges)
    return min(lightest, 1.0 / (2.0 * limit_distance(g).diameter()))


def as_quasi_metric(d: DenseMatrix | QuasiMetric, n: int | None = None) -> QuasiMetric:
    """Accept either a QuasiMetric or a raw distance matrix"""
    if isinstance(d, QuasiMetric):
        return d
    return QuasiMetric(d=as_dense_matrix(d, n), mode=DistanceMode.LIMIT)
