"""Curvature of ordered vertex pairs.

``kappa(x, y) = 1 - W1(mu_x, mu_y) / d(x, y)`` with the mean transition kernel and
the limit distance gives CURC. The other estimators here are variants of it
(epsilon-masked, idle), baselines for undirected graphs (Ollivier, Forman) or
cheap lower bounds that avoid solving a transport problem.
"""

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, Literal, TypeAlias

import numpy as np
import polars as pl
import scipy.optimize

from curvflow.errors import DomainError, LPError, VertexIndexError
from curvflow.graph_core import DirectedWeightedGraph, assert_strongly_connected
from curvflow.metric import DistanceMode, QuasiMetric, epsilon_distance, hop_distance, limit_distance
from curvflow.spectral import PerronKernel, idle_kernel, mean_transition_kernel
from curvflow.transport import LP_OPTIONS, lipschitz_system, wasserstein1
from curvflow.utils import parallel_map

logger = logging.getLogger(__name__)

Pair: TypeAlias = tuple[int, int]
PairSelection: TypeAlias = Literal["all", "edges"] | Iterable[Pair]

QUANTILES = (5, 25, 50, 75, 95)
"""Percentiles reported in every curvature summary"""


class CurvatureKind(StrEnum):
    CURC = "curc"
    CURC_EPS = "curc_eps"
    IDLE_CURC = "idle_curc"
    IDLE_CURC_ALPHA = "idle_curc_alpha"
    OLLIVIER = "ollivier"
    FORMAN = "forman"
    LB1 = "lb1"
    LB2 = "lb2"


@dataclass(frozen=True)
class CurvatureReport:
    """Curvature values of a list of ordered pairs"""

    kind: CurvatureKind
    values: dict[Pair, float]
    """Insertion order is the order in which pairs were requested"""
    parameters: dict[str, Any] = field(default_factory=dict)
    """Estimator settings such as ``eps`` or ``alpha``"""

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("a curvature report needs at least one pair")

    @property
    def summary(self) -> dict[str, Any]:
        """Min, max, mean and the percentiles in QUANTILES"""
        kappa = np.fromiter(self.values.values(), dtype=np.float64)
        return {
            "count": int(kappa.size),
            "min": float(kappa.min()),
            "max": float(kappa.max()),
            "mean": float(kappa.mean()),
            "quantiles": {f"p{q}": float(v) for q, v in zip(QUANTILES, np.percentile(kappa, QUANTILES))},
        }

    def to_dict(self) -> dict[str, Any]:
        """JSON form ``{kind, parameters, pairs: [{x, y, kappa}], summary}``"""
        return {
            "kind": str(self.kind),
            "parameters": dict(self.parameters),
            "pairs": [{"x": x, "y": y, "kappa": kappa} for (x, y), kappa in self.values.items()],
            "summary": self.summary,
        }

    def to_frame(self) -> pl.DataFrame:
        """One ``x, y, kappa`` row per pair"""
        return pl.DataFrame(
            {
                "x": [x for x, _ in self.values],
                "y": [y for _, y in self.values],
                "kappa": list(self.values.values()),
            },
            schema={"x": pl.Int64, "y": pl.Int64, "kappa": pl.Float64},
        )


def resolve_pairs(g: DirectedWeightedGraph, pairs: PairSelection = "all") -> list[Pair]:
    """Expand a pair selection into an explicit list.

    Args:
        g: Graph the pairs refer to.
        pairs: ``"all"`` for every ordered pair of distinct vertices, ``"edges"``
            for the support edges, or an explicit list of ``(x, y)`` tuples.

    Returns:
        Ordered pairs. Explicit lists keep their order.

    Raises:
        VertexIndexError: If an explicit pair refers to a missing vertex.
        ValueError: If an explicit pair repeats a vertex or the list is empty.
    """
    if isinstance(pairs, str):
        if pairs == "all":
            return [(x, y) for x in range(g.n) for y in range(g.n) if x != y]
        if pairs == "edges":
            return [(src, dst) for src, dst, _ in g.edges]
        raise ValueError(f"unknown pair selection '{pairs}'")

    resolved = []
    for x, y in pairs:
        x, y = int(x), int(y)
        if not (0 <= x < g.n and 0 <= y < g.n):
            raise VertexIndexError(f"pair ({x}, {y}) has an index outside [0, {g.n})", "curvature")
        if x == y:
            raise ValueError(f"pair ({x}, {y}) repeats a vertex")
        resolved.append((x, y))

    if not resolved:
        raise ValueError("no pairs selected")
    return resolved


def _report(
    kind: CurvatureKind,
    pairs: Sequence[Pair],
    fn: Callable[[Pair], float],
    workers: int | None,
    **parameters: Any,
) -> CurvatureReport:
    values = parallel_map(fn, pairs, workers)
    return CurvatureReport(kind, dict(zip(pairs, values)), parameters)


def transport_curvature(measures: np.ndarray, metric: QuasiMetric, x: int, y: int) -> float:
    """``1 - W1(measures[x], measures[y]) / d(x, y)``"""
    return 1.0 - wasserstein1(measures[x], measures[y], metric).cost / metric.d[x, y]


def curc(
    g: DirectedWeightedGraph,
    pairs: PairSelection = "all",
    workers: int | None = None,
    metric: DistanceMode | str = DistanceMode.LIMIT,
) -> CurvatureReport:
    """Continuous unified Ricci curvature.

    Args:
        g: Strongly connected graph.
        pairs: Pair selection, see :func:`resolve_pairs`.
        workers: Thread count for the per-pair transport solves.
        metric: ``limit`` for the weighted limit distance, ``hop`` to keep the mean
            transition kernel but measure transport in hops. :func:`lb2` bounds the
            hop version.

    Returns:
        The report. Hop curvature records ``metric`` in its parameters.

    Raises:
        NotStronglyConnectedError: If g has more than one component.
        DomainError: If ``metric`` is ``epsilon``, which needs :func:`curc_eps`.
    """
    mode = DistanceMode(metric)
    if mode is DistanceMode.EPSILON:
        raise DomainError("the epsilon-masked distance needs curc_eps")
    assert_strongly_connected(g, "curvature")
    selected = resolve_pairs(g, pairs)
    kernel = mean_transition_kernel(g)
    if mode is DistanceMode.HOP:
        distances, parameters = hop_distance(g), {"metric": str(mode)}
    else:
        distances, parameters = limit_distance(g), {}
    return _report(
        CurvatureKind.CURC, selected, lambda p: transport_curvature(kernel.mu, distances, *p), workers, **parameters
    )


def curc_eps(
    g: DirectedWeightedGraph, eps: float, pairs: PairSelection = "all", workers: int | None = None
) -> CurvatureReport:
    """CURC under the epsilon-masked distance instead of the limit distance.

    Equals :func:`curc` for eps up to :func:`~curvflow.metric.epsilon_star`. Above
    that the value is not monotone in eps. Masking shortens both the transport
    costs and ``d(x, y)``, so one direction of a pair can gain curvature while the
    other loses it. Once eps exceeds every weight all distances equal ``1/eps``.

    Args:
        g: Strongly connected graph.
        eps: Mask threshold, positive.
        pairs: Pair selection.
        workers: Thread count.

    Returns:
        The report, with ``eps`` recorded in its parameters.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    assert_strongly_connected(g, "curvature")
    selected = resolve_pairs(g, pairs)
    kernel = mean_transition_kernel(g)
    metric = epsilon_distance(g, eps)
    return _report(
        CurvatureKind.CURC_EPS, selected, lambda p: transport_curvature(kernel.mu, metric, *p), workers, eps=eps
    )


def _require_unweighted_undirected(g: DirectedWeightedGraph, what: str) -> None:
    if not g.is_unweighted_undirected():
        raise DomainError(f"{what} requires an unweighted undirected graph")


def ollivier(
    g: DirectedWeightedGraph, pairs: PairSelection = "all", alpha: float = 0.0, workers: int | None = None
) -> CurvatureReport:
    """Ollivier-Ricci curvature with uniform neighbour measures and hop distance.

    Args:
        g: Connected unweighted undirected graph.
        pairs: Pair selection.
        alpha: Probability of staying put, in [0, 1).
        workers: Thread count.

    Returns:
        The report, with ``alpha`` recorded in its parameters.

    Raises:
        DomainError: If g is weighted or directed.
    """
    _require_unweighted_undirected(g, "ollivier")
    if not 0 <= alpha < 1:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha}")

    selected = resolve_pairs(g, pairs)
    metric = hop_distance(g)
    adjacency = g.adjacency()
    measures = (1.0 - alpha) * adjacency / adjacency.sum(axis=1, keepdims=True) + alpha * np.eye(g.n)
    return _report(
        CurvatureKind.OLLIVIER, selected, lambda p: transport_curvature(measures, metric, *p), workers, alpha=alpha
    )


def forman(g: DirectedWeightedGraph, edge: Pair) -> int:
    """Forman-Ricci curvature ``4 - deg(x) - deg(y) + 3 * triangles(x, y)`` of an edge.

    Raises:
        DomainError: If g is weighted or directed, or ``edge`` is not an edge.
    """
    _require_unweighted_undirected(g, "forman")
    x, y = edge
    if not g.has_edge(x, y):
        raise DomainError(f"({x}, {y}) is not an edge")

    neighbors_x, neighbors_y = set(g.out_neighbors(x)), set(g.out_neighbors(y))
    return 4 - len(neighbors_x) - len(neighbors_y) + 3 * len(neighbors_x & neighbors_y)


def forman_report(g: DirectedWeightedGraph, pairs: PairSelection = "edges") -> CurvatureReport:
    """Forman-Ricci curvature of every selected edge"""
    selected = resolve_pairs(g, pairs)
    return CurvatureReport(CurvatureKind.FORMAN, {p: float(forman(g, p)) for p in selected})


def lb1(g: DirectedWeightedGraph, pairs: PairSelection = "all") -> CurvatureReport:
    """Lower bound on CURC from an explicit dual potential.

    Costs a few array operations per pair. With ``D = max(d(x, y), d(y, x))``,
    ``s = mu(x, y) + mu(y, x)`` and ``H = sum_z mu(y, z) d(y, z) + sum_z mu(x, z) d(z, x)``
    the bound is ``-(2D/d(x, y)) (1 - s)+ + (d(x, y) + D - H) / d(x, y) - ((D - d(y, x)) / d(x, y)) s``.

    Args:
        g: Strongly connected graph.
        pairs: Pair selection.

    Returns:
        The report. Each value is at most the CURC of its pair.
    """
    assert_strongly_connected(g, "curvature")
    selected = resolve_pairs(g, pairs)
    kernel = mean_transition_kernel(g)
    d = limit_distance(g).d

    xs = np.array([x for x, _ in selected])
    ys = np.array([y for _, y in selected])
    d_xy, d_yx = d[xs, ys], d[ys, xs]
    reach = np.maximum(d_xy, d_yx)
    shared = kernel.mu[xs, ys] + kernel.mu[ys, xs]
    expected = np.einsum("pz,pz->p", kernel.mu[ys], d[ys]) + np.einsum("pz,zp->p", kernel.mu[xs], d[:, xs])

    bound = (
        -(2.0 * reach / d_xy) * np.maximum(1.0 - shared, 0.0)
        + (d_xy + reach - expected) / d_xy
        - ((reach - d_yx) / d_xy) * shared
    )
    return CurvatureReport(CurvatureKind.LB1, dict(zip(selected, bound.tolist())))


def _four_cycle_sides(neighbors: list[set[int]], x: int, y: int) -> list[int]:
    """Neighbours z of x, away from y, that close a 4-cycle x, z, w, y with w a neighbour of y only"""
    side = []
    for z in sorted(neighbors[x] - neighbors[y] - {y}):
        if (neighbors[z] & neighbors[y]) - neighbors[x] - {x}:
            side.append(z)
    return side


def _four_cycle_transfer(mu: np.ndarray, neighbors: list[set[int]], x: int, y: int) -> float:
    left = _four_cycle_sides(neighbors, x, y)
    right = _four_cycle_sides(neighbors, y, x)
    if not left or not right:
        return 0.0

    weights = np.array([[min(mu[x, z], mu[y, w]) if w in neighbors[z] else 0.0 for w in right] for z in left])
    rows, cols = scipy.optimize.linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum())


def lb2(
    g: DirectedWeightedGraph,
    pairs: PairSelection = "edges",
    use_four_cycles: bool = True,
) -> CurvatureReport:
    """Lower bound on hop curvature from shared triangles and 4-cycles.

    Every transport move in the bound has unit length, so it bounds
    ``curc(g, metric="hop")``. It bounds the weighted CURC only on unweighted
    graphs, where both distances agree. The 4-cycle term pairs the two sides
    with a maximum-weight matching.

    Args:
        g: Strongly connected graph with symmetric support.
        pairs: Adjacent pairs only.
        use_four_cycles: Set to False for the bound that only counts triangles.

    Returns:
        The report, with ``use_four_cycles`` and ``metric`` recorded in its parameters.

    Raises:
        DomainError: If the support is asymmetric or a pair is not adjacent.
    """
    if not g.has_symmetric_support():
        raise DomainError("symmetric support required")
    assert_strongly_connected(g, "curvature")
    selected = resolve_pairs(g, pairs)
    neighbors = [set(g.out_neighbors(v)) for v in range(g.n)]
    for x, y in selected:
        if y not in neighbors[x]:
            raise DomainError(f"pair ({x}, {y}) is not adjacent")

    mu = mean_transition_kernel(g).mu
    values = {}
    for x, y in selected:
        common = sorted(neighbors[x] & neighbors[y])
        upper = sum(max(mu[x, z], mu[y, z]) for z in common)
        lower = sum(min(mu[x, z], mu[y, z]) for z in common)
        square = _four_cycle_transfer(mu, neighbors, x, y) if use_four_cycles else 0.0
        remaining = 1.0 - mu[x, y] - mu[y, x] - square
        values[(x, y)] = -max(remaining - upper, 0.0) - max(remaining - lower, 0.0) + lower

    return CurvatureReport(
        CurvatureKind.LB2, values, {"use_four_cycles": use_four_cycles, "metric": str(DistanceMode.HOP)}
    )


def laplacian_curvature(kernel: PerronKernel, metric: QuasiMetric, x: int, y: int) -> float:
    """Minimum of ``(Lf(y) - Lf(x)) / d(x, y)`` over 1-Lipschitz f with ``f(y) - f(x) = d(x, y)``.

    ``L = I - mu`` is the Laplacian of the mean transition kernel.

    Raises:
        LPError: If HiGHS does not report an optimum.
    """
    n = kernel.n
    laplacian = np.eye(n) - kernel.mu
    d_xy = metric.d[x, y]
    objective = (laplacian[y] - laplacian[x]) / d_xy

    A_ub, b_ub = lipschitz_system(metric.d)
    A_eq = np.zeros((1, n))
    A_eq[0, y], A_eq[0, x] = 1.0, -1.0
    bounds = [(None, None)] * n
    bounds[x] = (0.0, 0.0)

    result = scipy.optimize.linprog(
        objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[d_xy], bounds=bounds, method="highs", options=LP_OPTIONS
    )
    if result.status != 0:
        logger.error(f"Idle curvature LP failed on ({x}, {y}): {result.message}")
        raise LPError(f"idle curvature LP failed on ({x}, {y}): {result.message}", "curvature")
    return float(result.fun)


def idle_curc(g: DirectedWeightedGraph, pairs: PairSelection = "all", workers: int | None = None) -> CurvatureReport:
    """Idle curvature, the small-idleness limit of CURC, via its Laplacian form.

    Args:
        g: Strongly connected graph.
        pairs: Pair selection.
        workers: Thread count for the per-pair LPs.

    Returns:
        The report. Each value is at least the CURC of its pair.
    """
    assert_strongly_connected(g, "curvature")
    selected = resolve_pairs(g, pairs)
    kernel = mean_transition_kernel(g)
    metric = limit_distance(g)
    return _report(CurvatureKind.IDLE_CURC, selected, lambda p: laplacian_curvature(kernel, metric, *p), workers)


def idle_curc_alpha(
    g: DirectedWeightedGraph, alpha: float, pairs: PairSelection = "all", workers: int | None = None
) -> CurvatureReport:
    """``(1 - W1(mu^a_x, mu^a_y) / d(x, y)) / alpha`` with the alpha-idle kernel.

    Non-increasing in alpha. Equals CURC at alpha = 1 and tends to :func:`idle_curc`
    as alpha goes to zero.
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    assert_strongly_connected(g, "curvature")
    selected = resolve_pairs(g, pairs)
    measures = idle_kernel(mean_transition_kernel(g), alpha)
    metric = limit_distance(g)
    return _report(
        CurvatureKind.IDLE_CURC_ALPHA,
        selected,
        lambda p: transport_curvature(measures, metric, *p) / alpha,
        workers,
        alpha=alpha,
    )


def _check_vertex(g: DirectedWeightedGraph, x: int) -> None:
    if not 0 <= x < g.n:
        raise VertexIndexError(f"vertex {x} outside [0, {g.n})", "curvature")


def asymptotic_mean_curvature(g: DirectedWeightedGraph, x: int) -> float:
    """``-sum_y mu(x, y) d(x, y)``, the Laplacian of ``d(x, .)`` at x"""
    _check_vertex(g, x)
    assert_strongly_connected(g, "curvature")
    mu = mean_transition_kernel(g).mu
    return -float(mu[x] @ limit_distance(g).d[x])


def reverse_mean_curvature(g: DirectedWeightedGraph, x: int) -> float:
    """``-sum_y mu(x, y) d(y, x)``, the same average over the return distances"""
    _check_vertex(g, x)
    assert_strongly_connected(g, "curvature")
    mu = mean_transition_kernel(g).mu
    return -float(mu[x] @ limit_distance(g).d[:, x])
