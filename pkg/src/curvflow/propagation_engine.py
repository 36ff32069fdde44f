"""A forward-only propagation layer with configurable adjacency, connectivity and scope.

One layer runs four steps. An adjacency feature ``f(v, u)`` is built from the graph.
A connectivity ``omega(v, u)`` is computed from f, the node states and optional
edge features. Messages ``m_v = sum_u omega(v, u) M(h_u)`` are aggregated over
every head. The update ``h' = U(h, m)`` closes the layer. All coefficients come
from the configuration; nothing is trained.

Presets reproduce the propagation matrices of common architectures, and
:func:`cast_check` compares each preset against a direct formula for its model.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from enum import StrEnum
from typing import Any

import numpy as np

from curvflow.errors import ConfigError, DimensionError
from curvflow.graph_core import DenseMatrix, DirectedWeightedGraph
from curvflow.io.graph_files import JsonReader
from curvflow.io.interfaces import PathLike
from curvflow.metric import floyd_warshall
from curvflow.utils import parallel_map
from curvflow.wl_expressiveness import FeatureKind, FeatureSpec

logger = logging.getLogger(__name__)

CAST_TOLERANCE = 1e-10

MODULE = "propagation_engine"


class ConnectivityKind(StrEnum):
    FIXED_FEATURE = "fixed_feature"
    SOFTMAX_LINEAR = "softmax_linear"
    GATED_SIGMOID = "gated_sigmoid"


class ScopeKind(StrEnum):
    LOCAL = "local"
    NONLOCAL = "nonlocal"
    GLOBAL = "global"


class Preset(StrEnum):
    GCN = "gcn"
    SAGE_GCN = "sage_gcn"
    GIN = "gin"
    GATED = "gated"
    GAT = "gat"


def _floats(values: Any, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{what} must be a list of numbers", MODULE) from e


@dataclass(frozen=True)
class ConnectivityConfig:
    """Scoring rule for one head.

    ``fixed_feature`` reads ``omega`` straight from slice ``feature_index`` of the
    adjacency feature. The two learned forms score each pair as
    ``query . h_v + key . h_u + feature . [f(v, u) | E(v, u)] + bias``. Empty weight
    vectors stand for zeros.
    """

    kind: ConnectivityKind = ConnectivityKind.FIXED_FEATURE
    query: tuple[float, ...] = ()
    key: tuple[float, ...] = ()
    feature: tuple[float, ...] = ()
    bias: float = 0.0
    feature_index: int = 0

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "ConnectivityConfig":
        try:
            kind = ConnectivityKind(document.get("kind", ConnectivityKind.FIXED_FEATURE))
        except ValueError as e:
            raise ConfigError(f"unknown connectivity '{document.get('kind')}'", MODULE) from e
        return cls(
            kind=kind,
            query=_floats(document.get("query", ()), "query"),
            key=_floats(document.get("key", ()), "key"),
            feature=_floats(document.get("feature", ()), "feature"),
            bias=float(document.get("bias", 0.0)),
            feature_index=int(document.get("feature_index", 0)),
        )


@dataclass(frozen=True)
class ScopeConfig:
    """Which pairs may carry a nonzero ``omega``"""

    kind: ScopeKind = ScopeKind.LOCAL
    hops: int | None = None
    """Hop budget of the ``nonlocal`` scope"""
    self_loops: bool = True
    """Add ``(v, v)`` to the local and nonlocal scopes. The global scope always has it"""

    def __post_init__(self) -> None:
        if self.kind is ScopeKind.NONLOCAL and (self.hops is None or self.hops < 1):
            raise ConfigError("nonlocal scope needs a hop budget >= 1", MODULE)

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "ScopeConfig":
        try:
            kind = ScopeKind(document.get("kind", ScopeKind.LOCAL))
        except ValueError as e:
            raise ConfigError(f"unknown scope '{document.get('kind')}'", MODULE) from e
        hops = document.get("hops")
        return cls(kind, None if hops is None else int(hops), bool(document.get("self_loops", True)))


@dataclass(frozen=True)
class AffineMap:
    """``h W + b``. A missing weight is the identity and a missing bias is zero"""

    weight: tuple[tuple[float, ...], ...] | None = None
    bias: tuple[float, ...] | None = None

    def __call__(self, h: np.ndarray) -> np.ndarray:
        out = h
        if self.weight is not None:
            weight = np.asarray(self.weight, dtype=np.float64)
            if weight.ndim != 2 or weight.shape[0] != h.shape[1]:
                raise DimensionError(f"message weight of shape {weight.shape} cannot map {h.shape[1]} channels", MODULE)
            out = h @ weight
        if self.bias is not None:
            bias = np.asarray(self.bias, dtype=np.float64)
            if bias.shape != (out.shape[1],):
                raise DimensionError(f"message bias has {bias.size} entries for {out.shape[1]} channels", MODULE)
            out = out + bias
        return out

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "AffineMap":
        weight = document.get("weight")
        bias = document.get("bias")
        return cls(
            None if weight is None else tuple(_floats(row, "message weight") for row in weight),
            None if bias is None else _floats(bias, "message bias"),
        )


@dataclass(frozen=True)
class UpdateMap:
    """``h' = self_coef * h + message_coef * m + bias``.

    With ``self_coef == 0`` the message map may change the channel count.
    """

    self_coef: float = 0.0
    message_coef: float = 1.0
    bias: float = 0.0

    def __call__(self, h: np.ndarray, m: np.ndarray) -> np.ndarray:
        if self.self_coef == 0:
            return self.message_coef * m + self.bias
        if h.shape != m.shape:
            raise DimensionError(f"update needs matching shapes, got {h.shape} and {m.shape}", MODULE)
        return self.self_coef * h + self.message_coef * m + self.bias

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "UpdateMap":
        return cls(
            float(document.get("self_coef", 0.0)),
            float(document.get("message_coef", 1.0)),
            float(document.get("bias", 0.0)),
        )


@dataclass(frozen=True)
class LayerConfig:
    """Full description of one layer"""

    adjacency: FeatureSpec
    connectivity: tuple[ConnectivityConfig, ...]
    """One entry per head"""
    scope: ScopeConfig = field(default_factory=ScopeConfig)
    message_map: AffineMap = field(default_factory=AffineMap)
    update_map: UpdateMap = field(default_factory=UpdateMap)
    name: str | None = None

    def __post_init__(self) -> None:
        if not self.connectivity:
            raise ConfigError("at least one head is required", MODULE)

    @property
    def heads(self) -> int:
        return len(self.connectivity)

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "LayerConfig":
        """Parse a layer document.

        ``{"preset": name, "epsilon": x}`` selects a preset. Otherwise the document
        holds ``adjacency`` (a feature name), ``connectivity`` (one head object or a
        list of them), optional ``heads`` to repeat a single head, ``scope``,
        ``message_map`` and ``update_map``.

        Raises:
            ConfigError: On unknown names or malformed values.
        """
        if not isinstance(document, dict):
            raise ConfigError("layer config must be a JSON object", MODULE)

        if "preset" in document:
            return preset_config(document["preset"], epsilon=float(document.get("epsilon", 0.0)))

        if "adjacency" not in document or "connectivity" not in document:
            raise ConfigError("layer config needs 'adjacency' and 'connectivity'", MODULE)

        raw_heads = document["connectivity"]
        raw_heads = raw_heads if isinstance(raw_heads, list) else [raw_heads] * int(document.get("heads", 1))
        connectivity = tuple(ConnectivityConfig.from_dict(head) for head in raw_heads)

        return cls(
            adjacency=FeatureSpec.parse(str(document["adjacency"])),
            connectivity=connectivity,
            scope=ScopeConfig.from_dict(document.get("scope", {})),
            message_map=AffineMap.from_dict(document.get("message_map", {})),
            update_map=UpdateMap.from_dict(document.get("update_map", {})),
            name=document.get("name"),
        )


def load_layer_config(path: PathLike) -> LayerConfig:
    """Read a layer config JSON file"""
    return LayerConfig.from_dict(JsonReader().read(path))


def parse_layer_config(text: str) -> LayerConfig:
    """Parse a layer config from JSON text"""
    try:
        return LayerConfig.from_dict(json.loads(text))
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid layer config JSON: {e.msg}", MODULE) from e


def preset_config(preset: Preset | str, epsilon: float = 0.0) -> LayerConfig:
    """Layer config reproducing a known architecture.

    Args:
        preset: ``gcn``, ``sage_gcn``, ``gin``, ``gated`` or ``gat``.
        epsilon: GIN self weight offset, the update uses ``(1 + epsilon) h + m``.

    Returns:
        The config. Learned weights of ``gated`` and ``gat`` start at zero.
    """
    try:
        preset = Preset(preset)
    except ValueError as e:
        raise ConfigError(f"unknown preset '{preset}'", MODULE) from e

    fixed = (ConnectivityConfig(ConnectivityKind.FIXED_FEATURE),)
    match preset:
        case Preset.GCN:
            return LayerConfig(FeatureSpec(FeatureKind.SYM_NORM), fixed, name=str(preset))
        case Preset.SAGE_GCN:
            return LayerConfig(FeatureSpec(FeatureKind.ROW_NORM), fixed, name=str(preset))
        case Preset.GIN:
            return LayerConfig(
                FeatureSpec(FeatureKind.ADJ),
                fixed,
                scope=ScopeConfig(ScopeKind.LOCAL, self_loops=False),
                update_map=UpdateMap(self_coef=1.0 + epsilon),
                name=str(preset),
            )
        case Preset.GATED:
            return LayerConfig(
                FeatureSpec(FeatureKind.ADJ),
                (ConnectivityConfig(ConnectivityKind.GATED_SIGMOID),),
                scope=ScopeConfig(ScopeKind.LOCAL, self_loops=False),
                name=str(preset),
            )
        case Preset.GAT:
            return LayerConfig(
                FeatureSpec(FeatureKind.ADJ),
                (ConnectivityConfig(ConnectivityKind.SOFTMAX_LINEAR),),
                name=str(preset),
            )


def as_node_state(h: Any, n: int) -> np.ndarray:
    """Validate an ``n x c`` matrix of node states"""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim == 1:
        h = h[:, None]
    if h.ndim != 2 or h.shape[0] != n:
        raise DimensionError(f"node states must have shape ({n}, c), got {h.shape}", MODULE)
    if not np.all(np.isfinite(h)):
        raise DimensionError("node states have non-finite entries", MODULE)
    return h


def scope_mask(g: DirectedWeightedGraph, scope: ScopeConfig) -> np.ndarray:
    """Boolean matrix of the pairs allowed to carry weight"""
    if scope.kind is ScopeKind.GLOBAL:
        return np.ones((g.n, g.n), dtype=bool)

    if scope.kind is ScopeKind.LOCAL:
        mask = g.adjacency() > 0
    else:
        lengths = np.where(g.adjacency() > 0, 1.0, np.inf)
        np.fill_diagonal(lengths, 0.0)
        hops = floyd_warshall(lengths)
        mask = (hops >= 1) & (hops <= scope.hops)

    if scope.self_loops:
        mask = mask | np.eye(g.n, dtype=bool)
    return mask


def _weights(values: tuple[float, ...], size: int, what: str) -> np.ndarray:
    if not values:
        return np.zeros(size)
    if len(values) != size:
        raise DimensionError(f"{what} weights have {len(values)} entries, expected {size}", MODULE)
    return np.asarray(values)


def pair_scores(head: ConnectivityConfig, h: np.ndarray, pair_features: np.ndarray) -> DenseMatrix:
    """``query . h_v + key . h_u + feature . [f | E](v, u) + bias`` for every pair"""
    query = _weights(head.query, h.shape[1], "query")
    key = _weights(head.key, h.shape[1], "key")
    feature = _weights(head.feature, pair_features.shape[2], "feature")
    return (h @ query)[:, None] + (h @ key)[None, :] + pair_features @ feature + head.bias


def masked_softmax(scores: DenseMatrix, mask: np.ndarray) -> DenseMatrix:
    """Row softmax over the masked entries only. Rows with an empty mask stay zero"""
    shifted = np.where(mask, scores, -np.inf)
    row_max = shifted.max(axis=1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    weights = np.where(mask, np.exp(shifted - row_max), 0.0)
    total = weights.sum(axis=1, keepdims=True)
    return np.divide(weights, total, out=np.zeros_like(weights), where=total > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _head_matrix(
    head: ConnectivityConfig, features: np.ndarray, mask: np.ndarray, h: np.ndarray, edge_features: np.ndarray | None
) -> DenseMatrix:
    if head.kind is ConnectivityKind.FIXED_FEATURE:
        if not 0 <= head.feature_index < features.shape[2]:
            raise DimensionError(f"feature index {head.feature_index} outside the {features.shape[2]} slices", MODULE)
        return np.where(mask, features[:, :, head.feature_index], 0.0)

    pair_features = features if edge_features is None else np.concatenate([features, edge_features], axis=2)
    scores = pair_scores(head, h, pair_features)
    if head.kind is ConnectivityKind.SOFTMAX_LINEAR:
        return masked_softmax(scores, mask)

    gates = np.where(mask, sigmoid(scores), 0.0)
    total = gates.sum(axis=1, keepdims=True)
    return np.divide(gates, total, out=np.zeros_like(gates), where=total > 0)


def propagation_matrix(
    g: DirectedWeightedGraph,
    cfg: LayerConfig,
    h: Any,
    edge_features: np.ndarray | None = None,
    workers: int | None = 1,
) -> list[DenseMatrix]:
    """Connectivity matrix ``omega`` of every head.

    Args:
        g: Graph.
        cfg: Layer config.
        h: Node states, ``n x c``.
        edge_features: Optional ``n x n x e`` per-pair input appended to the adjacency feature.
        workers: Thread count across heads.

    Returns:
        One ``n x n`` matrix per head, in head order. Entries outside the scope are exactly zero.
    """
    h = as_node_state(h, g.n)
    if edge_features is not None:
        edge_features = np.asarray(edge_features, dtype=np.float64)
        if edge_features.ndim == 2:
            edge_features = edge_features[:, :, None]
        if edge_features.shape[:2] != (g.n, g.n):
            raise DimensionError(f"edge features must have shape ({g.n}, {g.n}, e), got {edge_features.shape}", MODULE)

    features = cfg.adjacency.build(g).values
    mask = scope_mask(g, cfg.scope)
    return parallel_map(lambda head: _head_matrix(head, features, mask, h, edge_features), cfg.connectivity, workers)


def layer_forward(
    g: DirectedWeightedGraph,
    cfg: LayerConfig,
    h: Any,
    edge_features: np.ndarray | None = None,
    workers: int | None = 1,
) -> np.ndarray:
    """Run one layer.

    Args:
        g: Graph.
        cfg: Layer config.
        h: Node states, ``n x c``.
        edge_features: Optional per-pair input.
        workers: Thread count across heads.

    Returns:
        Updated node states. Head messages are summed in head order.
    """
    h = as_node_state(h, g.n)
    transformed = cfg.message_map(h)
    messages = sum(omega @ transformed for omega in propagation_matrix(g, cfg, h, edge_features, workers))
    return cfg.update_map(h, messages)


def _edge_sets(g: DirectedWeightedGraph) -> list[list[int]]:
    neighbors: list[list[int]] = [[] for _ in range(g.n)]
    for src, dst, _ in g.edges:
        neighbors[src].append(dst)
    return neighbors


def _normalized_oracle(g: DirectedWeightedGraph, h: np.ndarray, symmetric: bool) -> np.ndarray:
    A_tilde = np.eye(g.n)
    for src, dst, _ in g.edges:
        A_tilde[src, dst] = 1.0
    degree = A_tilde.sum(axis=1)
    if symmetric:
        scale = np.diag(degree**-0.5)
        return scale @ A_tilde @ scale @ h
    return np.diag(1.0 / degree) @ A_tilde @ h


def _attention_oracle(
    g: DirectedWeightedGraph, cfg: LayerConfig, h: np.ndarray, with_self: bool, gated: bool
) -> np.ndarray:
    head = cfg.connectivity[0]
    q = np.asarray(head.query) if head.query else np.zeros(h.shape[1])
    k = np.asarray(head.key) if head.key else np.zeros(h.shape[1])
    w = head.feature[0] if head.feature else 0.0
    neighbors = _edge_sets(g)

    out = np.zeros_like(h)
    for v in range(g.n):
        members = sorted(set(neighbors[v]) | ({v} if with_self else set()))
        if not members:
            continue
        scores = [float(q @ h[v] + k @ h[u] + w * (1.0 if u in neighbors[v] else 0.0) + head.bias) for u in members]
        if gated:
            raw = [1.0 / (1.0 + np.exp(-s)) for s in scores]
        else:
            top = max(scores)
            raw = [np.exp(s - top) for s in scores]
        total = sum(raw)
        for u, r in zip(members, raw):
            out[v] += (r / total) * h[u]
    return out


def _oracle_messages(preset: Preset, g: DirectedWeightedGraph, cfg: LayerConfig, h: np.ndarray) -> np.ndarray:
    match preset:
        case Preset.GCN:
            return _normalized_oracle(g, h, symmetric=True)
        case Preset.SAGE_GCN:
            return _normalized_oracle(g, h, symmetric=False)
        case Preset.GIN:
            aggregated = np.zeros_like(h)
            for src, dst, _ in g.edges:
                aggregated[src] += h[dst]
            return aggregated
        case Preset.GATED:
            return _attention_oracle(g, cfg, h, with_self=False, gated=True)
        case Preset.GAT:
            return _attention_oracle(g, cfg, h, with_self=True, gated=False)


def cast_check(preset: Preset | str, g: DirectedWeightedGraph, h: Any, cfg: LayerConfig | None = None) -> bool:
    """Check a preset layer against a direct formula for its model.

    Messages are compared with the identity message map. The update map of the
    config is applied to both sides, so GIN checks ``(1 + epsilon) h + A h``.

    Args:
        preset: Preset name.
        g: Graph.
        h: Node states.
        cfg: Config to run instead of the default preset, for example with nonzero
            attention weights. Must keep the preset's structure.

    Returns:
        True if both agree within CAST_TOLERANCE.
    """
    preset = Preset(preset)
    cfg = replace(cfg or preset_config(preset), message_map=AffineMap())
    h = as_node_state(h, g.n)

    engine = layer_forward(g, cfg, h)
    expected = cfg.update_map(h, _oracle_messages(preset, g, cfg, h))

    agree = bool(np.allclose(engine, expected, rtol=0.0, atol=CAST_TOLERANCE))
    if not agree:
        logger.warning(f"Preset {preset} disagrees with its direct formula by {np.max(np.abs(engine - expected))}")
    return agree
