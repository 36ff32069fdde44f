"""Directed weighted graphs: construction, file I/O and connectivity checks.

Graphs are immutable once built. Edges are kept sorted by ``(src, dst)`` so every
downstream iteration order is deterministic. Self-loops never survive ingestion:
the mean transition kernel needs a random walk without diagonal mass.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
from pathlib import Path
from typing import Any, TypeAlias

import networkx as nx
import numpy as np
import numpy.typing as npt

from curvflow.errors import (
    DimensionError,
    EmptyGraphError,
    GraphFormatError,
    NonPositiveWeightError,
    NotStronglyConnectedError,
    VertexIndexError,
)
from curvflow.io.graph_files import EdgeListReader, GraphJsonReader, JsonWriter
from curvflow.io.interfaces import PathLike
from curvflow.io.matrix_files import read_matrix

logger = logging.getLogger(__name__)

DenseMatrix: TypeAlias = npt.NDArray[np.float64]
"""Square float64 array. Carrier for A, W, mu, d and propagation matrices"""

Edge: TypeAlias = tuple[int, int, float]


class GraphFormat(StrEnum):
    JSON = "json"
    EDGELIST = "edgelist"


@dataclass(frozen=True)
class DirectedWeightedGraph:
    """A finite digraph with strictly positive edge weights"""

    n: int
    """Vertex count"""

    edges: tuple[Edge, ...]
    """``(src, dst, weight)`` triples sorted by ``(src, dst)``"""

    name: str | None = None
    """Optional label"""

    metadata: dict[str, int] = field(default_factory=dict, compare=False)
    """Ingestion counters such as ``self_loops_dropped``"""

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise GraphFormatError(f"vertex count must be an integer >= 1, got {self.n!r}")

        seen = set()
        for src, dst, weight in self.edges:
            if not (0 <= src < self.n and 0 <= dst < self.n):
                raise VertexIndexError(f"edge ({src}, {dst}) has an index outside [0, {self.n})")
            if src == dst:
                raise GraphFormatError(f"self-loop at vertex {src}")
            if not np.isfinite(weight) or weight <= 0:
                raise NonPositiveWeightError(f"nonpositive weight {weight} on edge ({src}, {dst})")
            if (src, dst) in seen:
                raise GraphFormatError(f"duplicate edge ({src}, {dst})")
            seen.add((src, dst))

        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    @classmethod
    def from_edges(
        cls, n: int, edges: Iterable[tuple[int, int, float]], name: str | None = None
    ) -> "DirectedWeightedGraph":
        """Build a graph from raw triples, dropping self-loops.

        Args:
            n: Vertex count.
            edges: ``(src, dst, weight)`` triples in any order.
            name: Optional label.

        Returns:
            A validated graph. ``metadata["self_loops_dropped"]`` counts removed loops.
        """
        kept = []
        dropped = 0
        for src, dst, weight in edges:
            if src == dst:
                dropped += 1
                continue
            kept.append((int(src), int(dst), float(weight)))

        if dropped:
            logger.warning(f"Dropped {dropped} self-loop(s) while building graph '{name or ''}'")

        return cls(n, tuple(kept), name, {"self_loops_dropped": dropped})

    def weight_matrix(self) -> DenseMatrix:
        """Dense omega with zeros where there is no edge"""
        omega = np.zeros((self.n, self.n))
        for src, dst, weight in self.edges:
            omega[src, dst] = weight
        return omega

    def adjacency(self) -> DenseMatrix:
        """0/1 indicator of omega > 0"""
        return (self.weight_matrix() > 0).astype(np.float64)

    def scaled(self, factor: float) -> "DirectedWeightedGraph":
        """Copy with every weight multiplied by ``factor``"""
        if factor <= 0:
            raise ValueError(f"scale factor must be positive, got {factor}")
        return DirectedWeightedGraph(self.n, tuple((s, d, w * factor) for s, d, w in self.edges), self.name)

    def relabeled(self, permutation: Iterable[int]) -> "DirectedWeightedGraph":
        """Copy where vertex ``v`` becomes ``permutation[v]``"""
        perm = list(permutation)
        if sorted(perm) != list(range(self.n)):
            raise ValueError("permutation must reorder range(n)")
        return DirectedWeightedGraph(self.n, tuple((perm[s], perm[d], w) for s, d, w in self.edges), self.name)

    def to_networkx(self) -> nx.DiGraph:
        """Export as a networkx DiGraph with a ``weight`` edge attribute"""
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_weighted_edges_from(self.edges)
        return graph

    @cached_property
    def _successors(self) -> dict[int, list[int]]:
        successors: dict[int, list[int]] = {v: [] for v in range(self.n)}
        for src, dst, _ in self.edges:
            successors[src].append(dst)
        return successors

    @cached_property
    def _support(self) -> frozenset[tuple[int, int]]:
        return frozenset((s, d) for s, d, _ in self.edges)

    def has_edge(self, src: int, dst: int) -> bool:
        """True if ``src -> dst`` is an edge"""
        return (src, dst) in self._support

    def out_neighbors(self, v: int) -> list[int]:
        """Heads of the edges leaving ``v``, ascending"""
        return list(self._successors.get(v, []))

    def has_symmetric_support(self) -> bool:
        """True if ``x -> y`` exists exactly when ``y -> x`` does"""
        return all((d, s) in self._support for s, d in self._support)

    def is_unweighted_undirected(self) -> bool:
        """True for symmetric support with every weight equal to one"""
        return self.has_symmetric_support() and all(w == 1.0 for _, _, w in self.edges)


def as_dense_matrix(matrix: Any, n: int | None = None) -> DenseMatrix:
    """Validate a square, finite matrix.

    Args:
        matrix: Anything numpy can turn into a 2-d float array.
        n: Expected dimension, if known.

    Returns:
        The matrix as a float64 array.

    Raises:
        DimensionError: If the matrix is not square or not of dimension ``n``.
        GraphFormatError: If an entry is not finite.
    """
    array = np.asarray(matrix, dtype=np.float64)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {array.shape}", "graph_core")
    if n is not None and array.shape[0] != n:
        raise DimensionError(f"expected dimension {n}, got {array.shape[0]}", "graph_core")
    if not np.all(np.isfinite(array)):
        raise GraphFormatError("matrix has non-finite entries")
    return array


def load_graph(path: PathLike, file_format: GraphFormat | str | None = None) -> DirectedWeightedGraph:
    """Load and validate a graph file.

    Args:
        path: Graph file.
        file_format: ``json`` or ``edgelist``. Inferred from the suffix when omitted
            (``.json`` is JSON, anything else is an edge list).

    Returns:
        The validated graph.

    Raises:
        GraphFormatError: On parse errors, nonpositive weights or bad indices.
    """
    if file_format is None:
        file_format = GraphFormat.JSON if Path(path).suffix.lower() == ".json" else GraphFormat.EDGELIST
    file_format = GraphFormat(file_format)

    reader = GraphJsonReader() if file_format is GraphFormat.JSON else EdgeListReader()
    raw = reader.read(path)
    return DirectedWeightedGraph.from_edges(raw.n, raw.edges, raw.name)


def save_graph(graph: DirectedWeightedGraph, path: PathLike) -> None:
    """Write a graph as JSON. Weights are written at full precision"""
    payload: dict[str, Any] = {"n": graph.n, "edges": [list(edge) for edge in graph.edges]}
    if graph.name is not None:
        payload["name"] = graph.name
    JsonWriter(round_output=False).write(path, payload)


def load_matrix(path: PathLike) -> DenseMatrix:
    """Read a square matrix from matrix JSON or headerless CSV"""
    return as_dense_matrix(read_matrix(path))


def from_dense(matrix: Any, threshold: float = 0.0, name: str | None = None) -> DirectedWeightedGraph:
    """Turn a learned propagation or attention matrix into a graph.

    Edge ``(i, j)`` exists iff ``i != j`` and ``matrix[i, j] >= threshold``. The
    comparison is exact. Zero entries never become edges because weights must be
    positive. The diagonal is always dropped.

    Args:
        matrix: Square matrix of nonnegative reals.
        threshold: Nonnegative cut-off.
        name: Optional label.

    Returns:
        The graph. ``metadata`` records ``below_threshold_dropped`` (off-diagonal
        entries under the threshold) and ``self_loops_dropped`` (nonzero diagonal entries).

    Raises:
        EmptyGraphError: If no off-diagonal entry qualifies.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")

    array = as_dense_matrix(matrix)
    if np.any(array < 0):
        raise NonPositiveWeightError("propagation matrix has negative entries")

    n = array.shape[0]
    off_diagonal = ~np.eye(n, dtype=bool)
    keep = off_diagonal & (array >= threshold) & (array > 0)
    below = int(np.count_nonzero(off_diagonal & (array < threshold)))

    rows, cols = np.nonzero(keep)
    edges = tuple((int(i), int(j), float(array[i, j])) for i, j in zip(rows, cols))
    if not edges:
        raise EmptyGraphError("no off-diagonal entry reaches the threshold; the graph has no edges")

    if below:
        logger.warning(f"Dropped {below} entr(y/ies) below threshold {threshold}")
    loops = int(np.count_nonzero(np.diag(array)))
    if loops:
        logger.warning(f"Dropped {loops} self-loop(s) while building graph '{name or ''}'")

    metadata = {"self_loops_dropped": loops, "below_threshold_dropped": below}
    return DirectedWeightedGraph(n, edges, name, metadata)


def strongly_connected_components(graph: DirectedWeightedGraph) -> list[list[int]]:
    """Strongly connected components, each sorted, ordered by smallest vertex"""
    components = [sorted(c) for c in nx.strongly_connected_components(graph.to_networkx())]
    return sorted(components, key=lambda c: c[0])


def assert_strongly_connected(graph: DirectedWeightedGraph, module: str | None = None) -> None:
    """Raise unless one strongly connected component covers every vertex.

    Args:
        graph: Graph to check.
        module: Module name to attach to the error, for callers outside graph_core.

    Raises:
        NotStronglyConnectedError: Carrying the component decomposition.
    """
    components = strongly_connected_components(graph)
    if len(components) != 1:
        raise NotStronglyConnectedError(components, module)


def random_walk_matrix(graph: DirectedWeightedGraph) -> DenseMatrix:
    """Row-normalized omega: ``W[x, y] = omega(x, y) / sum_z omega(x, z)``.

    Raises:
        DimensionError: If some vertex has no outgoing edge.
    """
    omega = graph.weight_matrix()
    out_degree = omega.sum(axis=1)
    sinks = np.flatnonzero(out_degree <= 0)
    if sinks.size:
        raise DimensionError(f"vertices {sinks.tolist()} have zero out-degree", "graph_core")
    return omega / out_degree[:, None]
