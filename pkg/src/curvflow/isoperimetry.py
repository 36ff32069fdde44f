"""Boundary measures and the Dirichlet isoperimetric constant.

The constant of a region is found by enumerating every nonempty subset, so regions
are capped at MAX_REGION vertices. Alongside the brute-force minimum, the curvature
lower bound ``(K R + Lambda) / D`` is evaluated so that the two can be compared.
"""

import logging
from collections.abc import Collection, Sequence
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from curvflow.curvature import curc
from curvflow.errors import DomainError, RegionTooLargeError, VertexIndexError
from curvflow.graph_core import DenseMatrix, DirectedWeightedGraph, assert_strongly_connected
from curvflow.metric import QuasiMetric, as_quasi_metric, limit_distance
from curvflow.spectral import PerronKernel, mean_transition_kernel
from curvflow.utils import parallel_map

logger = logging.getLogger(__name__)

MAX_REGION = 20
"""Largest region enumerated subset by subset"""

CHUNK_BITS = 14
"""Subsets scored per vectorized block, as a power of two"""

TIE_TOLERANCE = 1e-12
"""Ratios this close to the minimum count as tied"""

RADIUS_QUANTILES = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class IsoperimetryResult:
    """Brute-force isoperimetric constant of ``{y : d(x, y) >= R}`` with the curvature bound"""

    x: int
    R: float
    region: list[int]
    I: float  # noqa: E741
    argmin_subset: list[int]
    bound: float
    """``(K R + Lambda) / D``"""
    bound_active: bool
    """``K R + Lambda > 0``. Otherwise the bound says nothing"""
    K: float
    """Smallest CURC from x"""
    Lambda: float
    """Asymptotic mean curvature at x"""
    D: float
    """Largest distance from x"""

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _validate_subset(n: int, omega: Collection[int]) -> np.ndarray:
    members = np.zeros(n, dtype=bool)
    for v in omega:
        if not 0 <= v < n:
            raise VertexIndexError(f"vertex {v} outside [0, {n})", "isoperimetry")
        members[v] = True
    if not members.any() or members.all():
        raise DomainError("subset must be nonempty and proper", "isoperimetry")
    return members


def boundary_measure(k: PerronKernel, omega: Collection[int], reflected: bool = False) -> float:
    """Perron mass leaving a vertex set in one step, ``sum_{y in omega, z not in omega} m(y) mu(y, z)``.

    Args:
        k: Kernel bundle.
        omega: Nonempty proper vertex subset.
        reflected: Sum the mass entering omega from its complement instead. Equal by detailed balance.

    Returns:
        The boundary measure.
    """
    members = _validate_subset(k.n, omega)
    flow = k.edge_measure()
    if reflected:
        return float(flow[np.ix_(~members, members)].sum())
    return float(flow[np.ix_(members, ~members)].sum())


def in_radius(g: DirectedWeightedGraph, x: int) -> float:
    """``max_y d(x, y)`` under the limit distance"""
    return float(limit_distance(g).d[x].max())


def candidate_radii(d: QuasiMetric | DenseMatrix, x: int, quantiles: Sequence[float] = RADIUS_QUANTILES) -> list[float]:
    """Distinct positive quantiles of ``d(x, .)``, taken from observed distances"""
    row = as_quasi_metric(d).d[x]
    radii = np.quantile(row[row > 0], quantiles, method="lower")
    return sorted({float(r) for r in radii})


def _subset_key(mask: int) -> tuple[int, ...]:
    """Sorted member positions of a bitmask. Tuples order subsets lexicographically"""
    return tuple(bit for bit in range(mask.bit_length()) if mask >> bit & 1)


def _score_block(start: int, stop: int, mass: np.ndarray, flow: np.ndarray) -> tuple[float, int]:
    masks = np.arange(start, stop, dtype=np.int64)
    members = ((masks[:, None] >> np.arange(mass.size)) & 1).astype(np.float64)
    inside = members @ mass
    internal = np.einsum("ci,ij,cj->c", members, flow, members)
    ratios = (inside - internal) / inside
    best = float(ratios.min())
    tied = masks[ratios <= best + TIE_TOLERANCE].tolist()
    return best, min(tied, key=_subset_key)


def _minimum_ratio(mass: np.ndarray, flow: np.ndarray, workers: int | None) -> tuple[float, int]:
    """Smallest boundary-to-mass ratio over nonempty subsets.

    Ratios within TIE_TOLERANCE of the minimum tie, and the lexicographically first
    subset among them wins, so ``{0, 3}`` beats ``{1}``.
    """
    total = 1 << mass.size
    block = 1 << CHUNK_BITS
    bounds = [(max(start, 1), min(start + block, total)) for start in range(0, total, block)]
    scored = parallel_map(lambda b: _score_block(b[0], b[1], mass, flow), bounds, workers)
    best = min(ratio for ratio, _ in scored)
    return best, min((mask for ratio, mask in scored if ratio <= best + TIE_TOLERANCE), key=_subset_key)


def dirichlet_constant(g: DirectedWeightedGraph, x: int, R: float, workers: int | None = None) -> IsoperimetryResult:
    """Minimum of ``m(boundary of S) / m(S)`` over nonempty ``S`` inside ``{y : d(x, y) >= R}``.

    Args:
        g: Strongly connected graph.
        x: Base vertex.
        R: Positive radius.
        workers: Thread count for the subset enumeration.

    Returns:
        The constant, a minimizing subset and the curvature bound.

    Raises:
        DomainError: If the region is empty.
        RegionTooLargeError: If the region has more than MAX_REGION vertices.
    """
    if not 0 <= x < g.n:
        raise VertexIndexError(f"vertex {x} outside [0, {g.n})", "isoperimetry")
    if not R > 0:
        raise DomainError(f"R must be positive, got {R}", "isoperimetry")

    assert_strongly_connected(g, "isoperimetry")
    kernel = mean_transition_kernel(g)
    d = limit_distance(g).d

    region = [int(y) for y in np.flatnonzero(d[x] >= R)]
    if not region:
        raise DomainError(f"no vertex lies at distance >= {R} from {x}", "isoperimetry")
    if len(region) > MAX_REGION:
        raise RegionTooLargeError(
            f"region has {len(region)} vertices, more than the {MAX_REGION} that can be enumerated"
        )

    flow = kernel.edge_measure()
    ratio, mask = _minimum_ratio(kernel.m[region], flow[np.ix_(region, region)], workers)
    argmin = [v for bit, v in enumerate(region) if mask >> bit & 1]

    K = min(curc(g, [(x, y) for y in range(g.n) if y != x], workers=workers).values.values())
    Lambda = -float(kernel.mu[x] @ d[x])
    D = float(d[x].max())
    numerator = K * R + Lambda

    logger.debug(f"Isoperimetric constant {ratio} at {argmin} for x={x}, R={R}")
    return IsoperimetryResult(
        x=x,
        R=float(R),
        region=region,
        I=ratio,
        argmin_subset=argmin,
        bound=numerator / D,
        bound_active=numerator > 0,
        K=K,
        Lambda=Lambda,
        D=D,
    )


def green_residual(k: PerronKernel, d: QuasiMetric | DenseMatrix, omega: Collection[int], x: int) -> float:
    """Gap between the two sides of the discrete Green identity for ``rho = d(x, .)``.

    Compares ``sum_{y in omega} L rho(y) m(y)`` with
    ``-sum_{y in omega, z not in omega} (rho(z) - rho(y)) m(y) mu(y, z)``.
    Zero up to roundoff because ``m(y) mu(y, z)`` is symmetric.
    """
    members = _validate_subset(k.n, omega)
    rho = as_quasi_metric(d, k.n).d[x]
    laplacian = rho - k.mu @ rho
    flow = k.edge_measure()[np.ix_(members, ~members)]

    inner = float(laplacian[members] @ k.m[members])
    crossing = -float(np.sum((rho[~members][None, :] - rho[members][:, None]) * flow))
    return abs(inner - crossing)


def laplacian_margin(g: DirectedWeightedGraph, x: int, K: float | None = None) -> float:
    """``min_{y != x} [L rho(y) - (K rho(y) + Lambda)]`` with ``rho = d(x, .)``.

    Args:
        g: Strongly connected graph.
        x: Base vertex.
        K: Curvature constant. Defaults to the smallest CURC from x.

    Returns:
        The margin. Not below zero, up to roundoff, whenever K is at most the idle curvature from x.
    """
    kernel = mean_transition_kernel(g)
    rho = limit_distance(g).d[x]
    laplacian = rho - kernel.mu @ rho
    if K is None:
        K = min(curc(g, [(x, y) for y in range(g.n) if y != x]).values.values())

    margin = laplacian - (K * rho + laplacian[x])
    return float(np.delete(margin, x).min())
