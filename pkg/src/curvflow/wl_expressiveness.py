"""Colour refinement driven by pairwise adjacency features.

A vertex's next colour is the hash of the multiset ``{(colour(u), f(v, u)) : u in V}``
taken over every vertex u, the vertex itself included. Static refinement uses one
feature every round. Dynamic refinement rotates through a cycle of features.
"""

import hashlib
import logging
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import networkx as nx
import numpy as np

from curvflow.errors import ColorCollisionError, ConfigError, DimensionError
from curvflow.graph_core import DirectedWeightedGraph
from curvflow.utils import ensure_list

logger = logging.getLogger(__name__)

FEATURE_DECIMALS = 12
"""Decimal places kept when a real feature enters a colour hash"""

HASH_BYTES = 8


class FeatureKind(StrEnum):
    RRWP = "rrwp"
    SPD = "spd"
    ADJ = "adj"
    SYM_NORM = "sym_norm"
    ROW_NORM = "row_norm"


@dataclass(frozen=True)
class FeatureSpec:
    """Named recipe for an adjacency feature, written ``rrwp:K``, ``spd:C``, ``adj``, ``sym_norm`` or ``row_norm``"""

    kind: FeatureKind
    param: int | None = None

    @classmethod
    def parse(cls, text: str) -> "FeatureSpec":
        """Parse a feature name.

        Raises:
            ConfigError: If the name is unknown or its parameter is missing or not a positive integer.
        """
        name, _, raw = text.strip().partition(":")
        try:
            kind = FeatureKind(name.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown feature '{text}'", "wl_expressiveness")

        if kind in (FeatureKind.RRWP, FeatureKind.SPD):
            try:
                param = int(raw)
            except ValueError:
                raise ConfigError(f"feature '{text}' needs a positive integer parameter", "wl_expressiveness")
            if param < 1:
                raise ConfigError(f"feature '{text}' needs a positive integer parameter", "wl_expressiveness")
            return cls(kind, param)

        if raw:
            raise ConfigError(f"feature '{kind}' takes no parameter", "wl_expressiveness")
        return cls(kind)

    def __str__(self) -> str:
        return str(self.kind) if self.param is None else f"{self.kind}:{self.param}"

    def build(self, g: DirectedWeightedGraph) -> "AdjacencyFeatures":
        """Compute the feature on a graph"""
        match self.kind:
            case FeatureKind.RRWP:
                return rrwp(g, self.param)
            case FeatureKind.SPD:
                return spd(g, self.param)
            case FeatureKind.ADJ:
                return raw_adjacency(g)
            case FeatureKind.SYM_NORM:
                return sym_norm(g)
            case FeatureKind.ROW_NORM:
                return row_norm(g)


@dataclass(frozen=True)
class AdjacencyFeatures:
    """Per-pair feature vectors stored as an ``n x n x K`` array"""

    values: np.ndarray
    label: str

    def __post_init__(self) -> None:
        if self.values.ndim != 3 or self.values.shape[0] != self.values.shape[1]:
            raise DimensionError(f"features must have shape (n, n, K), got {self.values.shape}", "wl_expressiveness")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[2]

    def f(self, v: int, u: int) -> np.ndarray:
        return self.values[v, u]

    def concat(self, other: "AdjacencyFeatures") -> "AdjacencyFeatures":
        """Stack two features along the feature axis"""
        if other.n != self.n:
            raise DimensionError(f"cannot concatenate features on {self.n} and {other.n} vertices", "wl_expressiveness")
        return AdjacencyFeatures(np.concatenate([self.values, other.values], axis=2), f"{self.label}|{other.label}")

    def permuted(self, permutation: Sequence[int]) -> "AdjacencyFeatures":
        """Features of the graph relabeled so that ``v`` becomes ``permutation[v]``"""
        inverse = np.argsort(permutation)
        return AdjacencyFeatures(self.values[np.ix_(inverse, inverse)], self.label)


def _indicator(g: DirectedWeightedGraph) -> np.ndarray:
    return g.adjacency()


def walk_matrix(g: DirectedWeightedGraph) -> np.ndarray:
    """``D^-1 A`` on the 0/1 adjacency. Rows of vertices without out-edges stay zero"""
    A = _indicator(g)
    degree = A.sum(axis=1, keepdims=True)
    return np.divide(A, degree, out=np.zeros_like(A), where=degree > 0)


def rrwp(g: DirectedWeightedGraph, K: int) -> AdjacencyFeatures:
    """Random-walk probabilities ``[I, M, M^2, ..., M^(K-1)]`` for every pair"""
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    M = walk_matrix(g)
    powers = [np.eye(g.n)]
    for _ in range(K - 1):
        powers.append(powers[-1] @ M)
    return AdjacencyFeatures(np.stack(powers, axis=2), f"rrwp:{K}")


def spd(g: DirectedWeightedGraph, cap: int) -> AdjacencyFeatures:
    """Hop distance capped at ``cap``. Unreachable pairs read ``cap``"""
    if cap < 1:
        raise ValueError(f"cap must be at least 1, got {cap}")
    d = np.full((g.n, g.n), float(cap))
    for source, lengths in nx.all_pairs_shortest_path_length(g.to_networkx()):
        for target, hops in lengths.items():
            d[source, target] = min(hops, cap)
    return AdjacencyFeatures(d[:, :, None], f"spd:{cap}")


def raw_adjacency(g: DirectedWeightedGraph) -> AdjacencyFeatures:
    return AdjacencyFeatures(_indicator(g)[:, :, None], "adj")


def _with_self_loops(g: DirectedWeightedGraph) -> tuple[np.ndarray, np.ndarray]:
    A = _indicator(g) + np.eye(g.n)
    return A, A.sum(axis=1)


def sym_norm(g: DirectedWeightedGraph) -> AdjacencyFeatures:
    """``D^-1/2 (A + I) D^-1/2`` with D the row sums of ``A + I``"""
    A, degree = _with_self_loops(g)
    scale = 1.0 / np.sqrt(degree)
    return AdjacencyFeatures((scale[:, None] * A * scale[None, :])[:, :, None], "sym_norm")


def row_norm(g: DirectedWeightedGraph) -> AdjacencyFeatures:
    """``D^-1 (A + I)``"""
    A, degree = _with_self_loops(g)
    return AdjacencyFeatures((A / degree[:, None])[:, :, None], "row_norm")


def parse_features(specs: str | Sequence[str]) -> list[FeatureSpec]:
    """Parse a comma-separated string or list of feature names"""
    return [FeatureSpec.parse(text) for text in ensure_list(specs)]


@dataclass(frozen=True)
class ColorMap:
    """Vertex colouring after a given number of refinement rounds"""

    colors: tuple[int, ...]
    round: int

    def partition(self) -> list[list[int]]:
        """Colour classes, each ascending, ordered by smallest member"""
        classes: dict[int, list[int]] = {}
        for v, color in enumerate(self.colors):
            classes.setdefault(color, []).append(v)
        return sorted(classes.values(), key=lambda c: c[0])

    def partition_key(self) -> tuple[int, ...]:
        """Index of each vertex's class. Equal keys mean equal partitions whatever the colour ids"""
        first: dict[int, int] = {}
        return tuple(first.setdefault(color, len(first)) for color in self.colors)

    def refines(self, other: "ColorMap") -> bool:
        """True if every class of this colouring lies inside a class of ``other``"""
        owner: dict[int, int] = {}
        for mine, theirs in zip(self.colors, other.colors):
            if owner.setdefault(mine, theirs) != theirs:
                return False
        return True

    def signature(self) -> tuple[int, ...]:
        """Sorted multiset of colours"""
        return tuple(sorted(self.colors))

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "colors": [f"{color:016x}" for color in self.colors],
            "partition": self.partition(),
        }


class ColorHasher:
    """Maps refinement payloads to 64-bit colour ids through BLAKE2b.

    Every payload seen is interned, so two payloads meeting at the same id are detected.
    One hasher can be shared by several graphs to make their colours comparable.
    """

    def __init__(self) -> None:
        self._seen: dict[int, tuple] = {}

    def __call__(self, payload: tuple) -> int:
        color = int.from_bytes(hashlib.blake2b(repr(payload).encode(), digest_size=HASH_BYTES).digest(), "big")
        known = self._seen.setdefault(color, payload)
        if known != payload:
            raise ColorCollisionError(f"colour {color:016x} assigned to two different payloads")
        return color


INITIAL_PAYLOAD = ("init",)


def _quantize(vector: np.ndarray) -> tuple[float, ...]:
    return tuple(round(float(x), FEATURE_DECIMALS) + 0.0 for x in vector)


def _step(colors: tuple[int, ...], feats: AdjacencyFeatures, hasher: ColorHasher, index: int) -> ColorMap:
    n = len(colors)
    quantized = [[_quantize(feats.values[v, u]) for u in range(n)] for v in range(n)]
    return ColorMap(
        tuple(hasher(tuple(sorted((colors[u], quantized[v][u]) for u in range(n)))) for v in range(n)),
        index,
    )


def _refine(
    n: int,
    feature_for_round: Callable[[int], AdjacencyFeatures],
    max_rounds: int,
    hasher: ColorHasher,
    stable_after: int | None,
) -> list[ColorMap]:
    """Run refinement rounds, stopping once the partition is unchanged ``stable_after`` times in a row"""
    history = [ColorMap(tuple(hasher(INITIAL_PAYLOAD) for _ in range(n)), 0)]
    unchanged = 0
    for t in range(max_rounds):
        feats = feature_for_round(t)
        if feats.n != n:
            raise DimensionError(f"features cover {feats.n} vertices, graph has {n}", "wl_expressiveness")

        current = _step(history[-1].colors, feats, hasher, t + 1)
        unchanged = unchanged + 1 if current.partition_key() == history[-1].partition_key() else 0
        history.append(current)
        if stable_after is not None and unchanged >= stable_after:
            break

    return history


def static_refine(
    g: DirectedWeightedGraph,
    feats: AdjacencyFeatures,
    max_rounds: int | None = None,
    hasher: ColorHasher | None = None,
) -> list[ColorMap]:
    """Refine with the same feature every round.

    Args:
        g: Graph. Need not be connected.
        feats: Features over every ordered pair, the diagonal included.
        max_rounds: Round cap, defaults to the vertex count.
        hasher: Shared hasher, for comparing colours across graphs.

    Returns:
        Colourings from round 0 to the first round whose partition equals the one before it.
    """
    rounds = g.n if max_rounds is None else max_rounds
    return _refine(g.n, lambda _: feats, rounds, hasher or ColorHasher(), stable_after=1)


def dynamic_refine(
    g: DirectedWeightedGraph,
    feat_cycle: Sequence[AdjacencyFeatures],
    max_rounds: int | None = None,
    hasher: ColorHasher | None = None,
) -> list[ColorMap]:
    """Refine with a feature that rotates every round.

    The step producing round ``t + 1`` uses ``feat_cycle[t % p]``. Refinement stops
    once the partition has stayed the same for a full cycle of p rounds.

    Args:
        g: Graph.
        feat_cycle: Nonempty cycle of features.
        max_rounds: Round cap, defaults to ``n * p``.
        hasher: Shared hasher.

    Returns:
        The colouring history.
    """
    if not feat_cycle:
        raise ValueError("feature cycle must not be empty")
    p = len(feat_cycle)
    rounds = g.n * p if max_rounds is None else max_rounds
    return _refine(g.n, lambda t: feat_cycle[t % p], rounds, hasher or ColorHasher(), stable_after=p)


@dataclass(frozen=True)
class RefineConfig:
    """Feature cycle for a refinement. One entry means static refinement"""

    features: list[FeatureSpec]
    max_rounds: int | None = None

    def __post_init__(self) -> None:
        if not self.features:
            raise ConfigError("at least one feature is required", "wl_expressiveness")

    @classmethod
    def from_strings(cls, specs: str | Sequence[str], max_rounds: int | None = None) -> "RefineConfig":
        return cls(parse_features(specs), max_rounds)

    @property
    def is_static(self) -> bool:
        return len(self.features) == 1

    def refine(self, g: DirectedWeightedGraph, hasher: ColorHasher | None = None) -> list[ColorMap]:
        """Run static or dynamic refinement on g"""
        built = [spec.build(g) for spec in self.features]
        if self.is_static:
            return static_refine(g, built[0], self.max_rounds, hasher)
        return dynamic_refine(g, built, self.max_rounds, hasher)


@dataclass(frozen=True)
class Distinction:
    """Outcome of comparing two graphs by refinement"""

    distinguishable: bool
    round: int | None = None
    """First round whose colour multisets differ"""
    signatures: list[dict[str, Any]] = field(default_factory=list, compare=False)

    def verdict(self) -> str:
        return f"distinguishable, round {self.round}" if self.distinguishable else "indistinguishable"


def distinguishes(g1: DirectedWeightedGraph, g2: DirectedWeightedGraph, config: RefineConfig) -> Distinction:
    """Compare the colour multisets of two graphs round by round.

    Both graphs run the same number of rounds with a shared hasher, enough for each to
    reach its stable partition. Round 0 is compared too, and only differs when the
    vertex counts do.

    Returns:
        Whether some round separates the graphs and the first such round. The
        signatures hold one entry per compared round, starting at round 0, so an
        indistinguishable pair on n vertices with p features has ``n * p + 1`` of them.
    """
    p = len(config.features)
    rounds = config.max_rounds if config.max_rounds is not None else max(g1.n, g2.n) * p
    hasher = ColorHasher()

    history = []
    for g in (g1, g2):
        built = [spec.build(g) for spec in config.features]
        history.append(_refine(g.n, lambda t, built=built: built[t % p], rounds, hasher, stable_after=None))

    signatures = []
    for first, second in zip(*history):
        left, right = Counter(first.colors), Counter(second.colors)
        signatures.append({"round": first.round, "equal": left == right})
        if left != right:
            logger.debug(f"Colour multisets split at round {first.round}")
            return Distinction(True, first.round, signatures)

    return Distinction(False, None, signatures)
