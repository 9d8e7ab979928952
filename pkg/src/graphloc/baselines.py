"""Reference localization baselines.

Two need no learning (uniform-random node choice; the node nearest the
centroid of all node positions). The learned ones share a bidirectional
LSTM dialog encoder and differ in how they summarize a node's k region
features and combine them with the dialog:

* late fusion     - self-attention pooling over regions, elementwise
                    product with the dialog vector, two-layer MLP score
* attention       - the dialog vector is the query attending over regions
* history variant - two encoders: dialog history (query for the region
                    attention; a learned null vector when empty) and the
                    final message (fused with the attended visual vector)
* graph conv      - message passing along graph edges conditioned on the
                    relative pose between endpoints, after seeding each
                    node state with pooled regions + dialog encoding

All learned variants end in a softmax over the environment's nodes and
train with the same cross-entropy objective as the transformer model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ValidationError
from .features import PanoObservation
from .layers import (ParamSet, init_linear, init_lstm, linear, lstm_run,
                     normal_init)
from .navgraph import NavGraph, centroid_node

BASELINE_KINDS = ("random", "center", "late_fusion", "attention",
                  "history_attention", "gcn")
LEARNED_KINDS = BASELINE_KINDS[2:]
EDGE_ATTR_DIM = 6


@dataclass(frozen=True)
class BaselineConfig:
    kind: str
    vocab_size: int = 0
    feature_dim: int = 0
    hidden: int = 64
    gcn_layers: int = 2

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValidationError(
                f"unknown baseline kind {self.kind!r}; expected one of {BASELINE_KINDS}"
            )
        if self.kind in LEARNED_KINDS:
            if self.vocab_size <= 0 or self.feature_dim <= 0 or self.hidden <= 0:
                raise ValidationError(
                    "learned baselines need positive vocab_size, feature_dim, hidden"
                )
        if self.kind == "gcn" and self.gcn_layers < 1:
            raise ValidationError("gcn_layers must be >= 1")

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        return cls(**d)


def _init_dialog_encoder(params: ParamSet, rng, prefix: str, hidden: int) -> None:
    init_lstm(params, rng, f"{prefix}.fwd", hidden, hidden)
    init_lstm(params, rng, f"{prefix}.bwd", hidden, hidden)
    init_linear(params, rng, f"{prefix}.proj", 2 * hidden, hidden,
                scale=1.0 / math.sqrt(2 * hidden))


def init_baseline_params(config: BaselineConfig, seed: int) -> ParamSet:
    # fan-in scaling throughout: unlike the transformer these nets have no
    # normalization layers to rescue a vanishing forward pass
    params = ParamSet()
    if config.kind not in LEARNED_KINDS:
        return params
    rng = np.random.default_rng(seed)
    h = config.hidden
    s_h = 1.0 / math.sqrt(h)
    normal_init(params, rng, "emb", (config.vocab_size, h), scale=s_h)
    if config.kind == "history_attention":
        _init_dialog_encoder(params, rng, "hist", h)
        _init_dialog_encoder(params, rng, "curr", h)
        normal_init(params, rng, "hist.null", (1, h), scale=s_h)
    else:
        _init_dialog_encoder(params, rng, "dialog", h)
    init_linear(params, rng, "regions.proj", config.feature_dim, h,
                scale=1.0 / math.sqrt(config.feature_dim))
    if config.kind in ("late_fusion", "gcn"):
        init_linear(params, rng, "pool.score1", h, h, scale=s_h)
        init_linear(params, rng, "pool.score2", h, 1, scale=s_h)
    if config.kind in ("attention", "history_attention"):
        init_linear(params, rng, "query", h, h, scale=s_h)
    if config.kind == "gcn":
        init_linear(params, rng, "gcn.init", 2 * h, h, scale=1.0 / math.sqrt(2 * h))
        for layer in range(config.gcn_layers):
            init_linear(params, rng, f"gcn.{layer}.msg", h + EDGE_ATTR_DIM, h,
                        scale=1.0 / math.sqrt(h + EDGE_ATTR_DIM))
            init_linear(params, rng, f"gcn.{layer}.self", h, h, scale=s_h)
        init_linear(params, rng, "gcn.head", h, 1, scale=s_h)
    else:
        init_linear(params, rng, "fuse.hidden", h, h, scale=s_h)
        init_linear(params, rng, "fuse.out", h, 1, scale=s_h)
    return params


# ---------------------------------------------------------------------------
# dialog encoding


def _bilstm(params: ParamSet, prefix: str, ids, hidden: int) -> tuple[Tensor, Tensor]:
    """Final forward and backward hidden states, each (1, hidden)."""
    if len(ids) == 0:
        raise ValidationError("cannot encode an empty token sequence")
    idx = np.asarray(ids, dtype=np.int64)
    emb = params["emb"][idx]
    fwd = lstm_run(params, f"{prefix}.fwd", emb, hidden)
    bwd = lstm_run(params, f"{prefix}.bwd", params["emb"][idx[::-1].copy()], hidden)
    return fwd, bwd


def _encode_seq(params: ParamSet, prefix: str, ids, hidden: int) -> Tensor:
    fwd, bwd = _bilstm(params, prefix, ids, hidden)
    return linear(params, f"{prefix}.proj", ad.concat([fwd, bwd], axis=1))  # (1, h)


def encode_dialog(params: ParamSet, config: BaselineConfig, dialog_ids) -> np.ndarray:
    """Dialog summary vector of length ``hidden``."""
    return _encode_seq(params, "dialog", dialog_ids, config.hidden).value[0].copy()


# ---------------------------------------------------------------------------
# region summaries


def _sorted_panos(panos: list[PanoObservation]) -> list[PanoObservation]:
    ordered = sorted(panos, key=lambda p: p.node_id)
    if len({p.node_id for p in ordered}) != len(ordered):
        raise ValidationError("duplicate node ids among panoramas")
    if not ordered:
        raise ValidationError("at least one panorama required")
    return ordered


def _project_regions(params: ParamSet, panos: list[PanoObservation]) -> Tensor:
    feats = np.stack([p.visual_matrix() for p in panos])  # (N, k, d_f)
    return linear(params, "regions.proj", Tensor(feats))  # (N, k, h)


def _self_pool(params: ParamSet, proj: Tensor) -> Tensor:
    """Region self-attention pooling: (N, k, h) -> (N, h)."""
    scores = linear(params, "pool.score2", ad.tanh(linear(params, "pool.score1", proj)))
    weights = ad.softmax(scores, axis=1)  # (N, k, 1)
    return ad.sum_(weights * proj, axis=1)


def _query_pool(params: ParamSet, proj: Tensor, query_vec: Tensor) -> Tensor:
    """Attention over regions with an external query: query_vec (1, h)."""
    h = proj.shape[-1]
    q = linear(params, "query", query_vec)  # (1, h)
    scores = proj @ ad.reshape(q, (h, 1)) * (1.0 / math.sqrt(h))  # (N, k, 1)
    weights = ad.softmax(scores, axis=1)
    return ad.sum_(weights * proj, axis=1)


def _mlp_scores(params: ParamSet, pooled: Tensor, dialog_vec: Tensor) -> Tensor:
    """Elementwise fusion then a two-layer MLP to one score per node."""
    n = pooled.shape[0]
    fused = pooled * ad.broadcast_to(dialog_vec, (n, dialog_vec.shape[-1]))
    hidden = ad.tanh(linear(params, "fuse.hidden", fused))
    return ad.reshape(linear(params, "fuse.out", hidden), (n,))


# ---------------------------------------------------------------------------
# per-kind score functions (autodiff tensors)


def _scores_late_fusion(params, config, panos, dialog_ids) -> Tensor:
    dialog_vec = _encode_seq(params, "dialog", dialog_ids, config.hidden)
    pooled = _self_pool(params, _project_regions(params, panos))
    return _mlp_scores(params, pooled, dialog_vec)


def _scores_attention(params, config, panos, dialog_ids) -> Tensor:
    dialog_vec = _encode_seq(params, "dialog", dialog_ids, config.hidden)
    attended = _query_pool(params, _project_regions(params, panos), dialog_vec)
    return _mlp_scores(params, attended, dialog_vec)


def _scores_history(params, config, panos, message_ids) -> Tensor:
    if not message_ids:
        raise ValidationError("history-attention model needs at least one message")
    current_vec = _encode_seq(params, "curr", message_ids[-1], config.hidden)
    history = [tid for msg in message_ids[:-1] for tid in msg]
    if history:
        history_vec = _encode_seq(params, "hist", history, config.hidden)
    else:
        history_vec = params["hist.null"]
    attended = _query_pool(params, _project_regions(params, panos), history_vec)
    return _mlp_scores(params, attended, current_vec)


def edge_attributes(graph: NavGraph, src: str, dst: str) -> np.ndarray:
    """Relative pose of ``dst`` seen from ``src``: displacement rotated
    into the source heading frame (3), heading difference as cos/sin (2),
    elevation difference (1)."""
    a, b = graph.node(src).pose, graph.node(dst).pose
    delta = b.xyz - a.xyz
    cos_h, sin_h = math.cos(a.heading), math.sin(a.heading)
    local = np.array([
        cos_h * delta[0] + sin_h * delta[1],
        -sin_h * delta[0] + cos_h * delta[1],
        delta[2],
    ])
    dh = b.heading - a.heading
    return np.concatenate([local, [math.cos(dh), math.sin(dh)],
                           [b.elevation - a.elevation]])


def _gcn_structure(graph: NavGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(source index per directed edge, edge attribute matrix, mean
    aggregation matrix mapping directed-edge messages to their target)."""
    ids = list(graph.node_ids)
    index = {nid: i for i, nid in enumerate(ids)}
    directed = sorted((s, d) for e in graph.edges for s, d in
                      [(e.endpoints[0], e.endpoints[1]), (e.endpoints[1], e.endpoints[0])])
    n, m = len(ids), len(directed)
    src_idx = np.asarray([index[s] for s, _ in directed], dtype=np.int64)
    attrs = np.zeros((m, EDGE_ATTR_DIM))
    agg = np.zeros((n, m))
    degree = np.zeros(n)
    for j, (_, d) in enumerate(directed):
        degree[index[d]] += 1
    for j, (s, d) in enumerate(directed):
        attrs[j] = edge_attributes(graph, s, d)
        agg[index[d], j] = 1.0 / degree[index[d]]
    return src_idx, attrs, agg


def _scores_gcn(params, config, graph, panos, dialog_ids) -> Tensor:
    dialog_vec = _encode_seq(params, "dialog", dialog_ids, config.hidden)
    pooled = _self_pool(params, _project_regions(params, panos))
    n = pooled.shape[0]
    seed = ad.concat([pooled, ad.broadcast_to(dialog_vec, (n, config.hidden))], axis=1)
    states = ad.tanh(linear(params, "gcn.init", seed))
    src_idx, attrs, agg = _gcn_structure(graph)
    for layer in range(config.gcn_layers):
        inbound = ad.concat([states[src_idx], Tensor(attrs)], axis=1)
        messages = ad.tanh(linear(params, f"gcn.{layer}.msg", inbound))
        states = ad.tanh(linear(params, f"gcn.{layer}.self", states)
                         + Tensor(agg) @ messages)
    return ad.reshape(linear(params, "gcn.head", states), (n,))


# ---------------------------------------------------------------------------
# public predictors


def random_baseline(graph: NavGraph, rng: np.random.Generator) -> str:
    """Uniform draw over the environment's nodes."""
    ids = graph.node_ids
    return ids[int(rng.integers(len(ids)))]


def center_baseline(graph: NavGraph) -> str:
    """Node nearest the mean of all node positions."""
    return centroid_node(graph)


def _probs(scores: Tensor) -> np.ndarray:
    return ad.softmax(scores, axis=-1).value.copy()


def late_fusion_predict(params: ParamSet, config: BaselineConfig,
                        panos: list[PanoObservation], dialog_ids) -> np.ndarray:
    return _probs(_scores_late_fusion(params, config, _sorted_panos(panos), dialog_ids))


def attention_predict(params: ParamSet, config: BaselineConfig,
                      panos: list[PanoObservation], dialog_ids) -> np.ndarray:
    return _probs(_scores_attention(params, config, _sorted_panos(panos), dialog_ids))


def history_attention_predict(params: ParamSet, config: BaselineConfig,
                              panos: list[PanoObservation],
                              message_ids: list[list[int]]) -> np.ndarray:
    return _probs(_scores_history(params, config, _sorted_panos(panos), message_ids))


def gcn_predict(params: ParamSet, config: BaselineConfig, graph: NavGraph,
                panos: list[PanoObservation], dialog_ids) -> np.ndarray:
    ordered = _sorted_panos(panos)
    if [p.node_id for p in ordered] != list(graph.node_ids):
        raise ValidationError("panoramas do not cover the graph's nodes exactly")
    return _probs(_scores_gcn(params, config, graph, ordered, dialog_ids))


def baseline_scores(params: ParamSet, config: BaselineConfig, graph: NavGraph,
                    panos: list[PanoObservation], dialog_input) -> tuple[list[str], Tensor]:
    """Dispatch to the kind's score function. ``dialog_input`` is the
    flattened id list, except for the history model which takes per-message
    id lists. Returns (sorted node ids, raw score tensor)."""
    ordered = _sorted_panos(panos)
    ids = [p.node_id for p in ordered]
    if config.kind == "late_fusion":
        scores = _scores_late_fusion(params, config, ordered, dialog_input)
    elif config.kind == "attention":
        scores = _scores_attention(params, config, ordered, dialog_input)
    elif config.kind == "history_attention":
        scores = _scores_history(params, config, ordered, dialog_input)
    elif config.kind == "gcn":
        if ids != list(graph.node_ids):
            raise ValidationError("panoramas do not cover the graph's nodes exactly")
        scores = _scores_gcn(params, config, graph, ordered, dialog_input)
    else:
        raise ValidationError(f"kind {config.kind!r} has no learned score function")
    return ids, scores


def baseline_loss(params: ParamSet, config: BaselineConfig, graph: NavGraph,
                  panos: list[PanoObservation], dialog_input,
                  target_node: str) -> tuple[float, dict[str, np.ndarray]]:
    """Cross-entropy over the environment's nodes, like the transformer's
    fine-tuning objective."""
    ids, scores = baseline_scores(params, config, graph, panos, dialog_input)
    if target_node not in ids:
        raise ValidationError(f"target node {target_node!r} not among environment nodes")
    loss = -ad.log_softmax(scores, axis=-1)[ids.index(target_node)]
    params.zero_grads()
    ad.backward(loss)
    grads = params.grads()
    params.zero_grads()
    return float(loss.value), grads
