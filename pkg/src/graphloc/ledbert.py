"""Dual-stream co-attention transformer scoring dialog-node compatibility.

One stream encodes region features of a panoramic node (an IMG token
followed by k region tokens), the other encodes the flattened dialog (CLS,
word tokens, SEP). Configured layers exchange information through
co-attention: each stream's queries attend over the other stream's keys and
values. The compatibility score is a linear readout of the elementwise
product of the two final stream representations; per-environment scores are
softmax-normalized into a distribution over nodes.

Inference functions are pure and deterministic; loss functions return the
scalar loss together with gradients for every parameter. Scoring of the
nodes of an environment is vectorized as one batch and each node's score
depends only on its own pair, so results are identical to scoring nodes
one at a time (or in parallel) and renormalizing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .episodes import SPECIALS, Vocabulary, CLS, SEP, MASK
from .errors import ValidationError
from .features import PanoObservation, SPATIAL_DIM, encode_region_spatial
from .layers import (INIT_SCALE, ParamSet, attention, encoder_block, ffn,
                     init_attention, init_encoder_block, init_ffn,
                     init_layer_norm, init_linear, layer_norm, linear,
                     merge_heads, normal_init, scaled_dot_attention,
                     split_heads, zeros_init)

N_SPECIALS = len(SPECIALS)
CLS_ID = SPECIALS.index(CLS)
SEP_ID = SPECIALS.index(SEP)
MASK_ID = SPECIALS.index(MASK)


@dataclass(frozen=True)
class LedBertConfig:
    """Desk-scale defaults: two layers per stream with one co-attention
    exchange after the last pair of layers."""

    vocab_size: int
    feature_dim: int
    d_t: int = 64
    d_v: int = 64
    text_layers: int = 2
    visual_layers: int = 2
    co_attention_layer_indices: tuple[int, ...] = (1,)
    heads: int = 4
    d_ff: int = 256
    l_max: int = 64
    k_max: int = 36
    mask_rate: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "co_attention_layer_indices",
                           tuple(int(i) for i in self.co_attention_layer_indices))
        if self.d_t % self.heads or self.d_v % self.heads:
            raise ValidationError(
                f"d_t={self.d_t} and d_v={self.d_v} must be divisible by heads={self.heads}"
            )
        n_layers = max(self.text_layers, self.visual_layers)
        for i in self.co_attention_layer_indices:
            if not 0 <= i < n_layers:
                raise ValidationError(
                    f"co-attention index {i} out of range for {n_layers} layers"
                )
        if not 0.0 < self.mask_rate <= 1.0:
            raise ValidationError(f"mask_rate must lie in (0, 1], got {self.mask_rate}")
        if self.vocab_size <= N_SPECIALS:
            raise ValidationError(f"vocab_size must exceed {N_SPECIALS}")

    @property
    def d_co(self) -> int:
        """Width of the co-attention exchange (shared by both streams)."""
        return min(self.d_t, self.d_v)

    @property
    def d_score(self) -> int:
        """Width of the compatibility head input."""
        return min(self.d_t, self.d_v)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["co_attention_layer_indices"] = list(self.co_attention_layer_indices)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LedBertConfig":
        d = dict(d)
        d["co_attention_layer_indices"] = tuple(d.get("co_attention_layer_indices", ()))
        return cls(**d)


@dataclass(frozen=True)
class PairRepresentation:
    """Final stream representations for one dialog-node pair."""

    h_cls: np.ndarray
    h_img: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.h_cls)) and np.all(np.isfinite(self.h_img))):
            raise ValidationError("pair representation must be finite")


def init_params(config: LedBertConfig, seed: int) -> ParamSet:
    # Fan-in scaling keeps every projection's output at unit order, so
    # gradients reach the co-attention and embedding tensors with usable
    # magnitude.  The MLM head is the exception: a near-zero head keeps the
    # untrained masked-token loss at the analytic ln(vocab) value, and its
    # own gradient does not vanish there.
    rng = np.random.default_rng(seed)
    params = ParamSet()
    normal_init(params, rng, "token_emb", (config.vocab_size, config.d_t),
                1.0 / math.sqrt(config.d_t))
    normal_init(params, rng, "pos_emb", (config.l_max + 2, config.d_t),
                1.0 / math.sqrt(config.d_t))
    normal_init(params, rng, "img_emb", (config.d_v,), 1.0 / math.sqrt(config.d_v))
    normal_init(params, rng, "w_spatial", (SPATIAL_DIM, config.d_v),
                1.0 / math.sqrt(SPATIAL_DIM))
    normal_init(params, rng, "vis_proj", (config.feature_dim, config.d_v),
                1.0 / math.sqrt(config.feature_dim))
    for i in range(config.text_layers):
        init_encoder_block(params, rng, f"text.{i}", config.d_t, config.heads, config.d_ff)
    for i in range(config.visual_layers):
        init_encoder_block(params, rng, f"vis.{i}", config.d_v, config.heads, config.d_ff)
    for i in config.co_attention_layer_indices:
        _init_co_block(params, rng, f"co.{i}", config)
    init_layer_norm(params, "text_final_ln", config.d_t)
    init_layer_norm(params, "vis_final_ln", config.d_v)
    if config.d_t != config.d_v:
        normal_init(params, rng, "score_proj_t", (config.d_t, config.d_score),
                    1.0 / math.sqrt(config.d_t))
        normal_init(params, rng, "score_proj_v", (config.d_v, config.d_score),
                    1.0 / math.sqrt(config.d_v))
    normal_init(params, rng, "score_w", (config.d_score,),
                1.0 / math.sqrt(config.d_score))
    zeros_init(params, "score_b", ())
    normal_init(params, rng, "mlm_w", (config.d_t, config.vocab_size), INIT_SCALE)
    zeros_init(params, "mlm_b", (config.vocab_size,))
    return params


def _init_co_block(params: ParamSet, rng, name: str, config: LedBertConfig) -> None:
    d_c = config.d_co
    init_layer_norm(params, f"{name}.t_ln1", config.d_t)
    init_layer_norm(params, f"{name}.v_ln1", config.d_v)
    for side, d_in in (("t", config.d_t), ("v", config.d_v)):
        init_linear(params, rng, f"{name}.{side}_q", d_in, d_c)
        init_linear(params, rng, f"{name}.{side}_k", d_in, d_c)
        init_linear(params, rng, f"{name}.{side}_v", d_in, d_c)
    init_linear(params, rng, f"{name}.t_o", d_c, config.d_t)
    init_linear(params, rng, f"{name}.v_o", d_c, config.d_v)
    init_layer_norm(params, f"{name}.t_ln2", config.d_t)
    init_layer_norm(params, f"{name}.v_ln2", config.d_v)
    init_ffn(params, rng, f"{name}.t_ff", config.d_t, config.d_ff)
    init_ffn(params, rng, f"{name}.v_ff", config.d_v, config.d_ff)


# ---------------------------------------------------------------------------
# embedding and the stream stack


def _check_lengths(config: LedBertConfig, token_ids, k: int | None) -> None:
    if len(token_ids) > config.l_max:
        raise ValidationError(
            f"token sequence length {len(token_ids)} exceeds l_max={config.l_max}; "
            "caller must truncate"
        )
    if k is not None and k > config.k_max:
        raise ValidationError(f"panorama has k={k} regions, exceeds k_max={config.k_max}")


def _embed_text(params: ParamSet, config: LedBertConfig, token_ids) -> Tensor:
    """(1, L+2, d_t): CLS + word embeddings + SEP, plus positional rows."""
    ids = np.asarray([CLS_ID] + list(token_ids) + [SEP_ID], dtype=np.int64)
    tok = params["token_emb"][ids]
    pos = params["pos_emb"][np.arange(len(ids))]
    return ad.reshape(tok + pos, (1, len(ids), config.d_t))


def _embed_visual(params: ParamSet, config: LedBertConfig,
                  panos: list[PanoObservation]) -> Tensor:
    """(N, k+1, d_v): IMG token followed by projected region features plus
    projected spatial encodings. Region tokens carry no sequence-position
    embedding; geometry enters only through the spatial encoding."""
    feats = np.stack([p.visual_matrix() for p in panos])  # (N, k, d_f)
    spatial = np.stack([
        np.stack([encode_region_spatial(r.box) for r in p.regions]) for p in panos
    ])  # (N, k, 11)
    if feats.shape[2] != config.feature_dim:
        raise ValidationError(
            f"region feature dim {feats.shape[2]} does not match config feature_dim="
            f"{config.feature_dim}"
        )
    regions = Tensor(feats) @ params["vis_proj"] + Tensor(spatial) @ params["w_spatial"]
    n = len(panos)
    img = ad.broadcast_to(ad.reshape(params["img_emb"], (1, 1, config.d_v)),
                          (n, 1, config.d_v))
    return ad.concat([img, regions], axis=1)


def embed_inputs(params: ParamSet, config: LedBertConfig,
                 pano: PanoObservation | None, token_ids) -> tuple[Tensor | None, Tensor]:
    """Input token matrices for one dialog-node pair: (visual (1, k+1, d_v)
    or None when no panorama is given, text (1, L+2, d_t))."""
    _check_lengths(config, token_ids, pano.k if pano is not None else None)
    text = _embed_text(params, config, token_ids)
    vis = _embed_visual(params, config, [pano]) if pano is not None else None
    return vis, text


def co_attention(params: ParamSet, config: LedBertConfig, layer: int,
                 text_states: Tensor, visual_states: Tensor) -> tuple[Tensor, Tensor]:
    """One co-attention exchange: both streams project queries, keys, and
    values from their own (pre-normalized) states, then the key/value pairs
    are swapped so text queries attend over visual keys/values and vice
    versa. Residual connections and per-stream feed-forwards follow."""
    name = f"co.{layer}"
    heads = config.heads
    t_norm = layer_norm(params, f"{name}.t_ln1", text_states)
    v_norm = layer_norm(params, f"{name}.v_ln1", visual_states)
    q_t = split_heads(linear(params, f"{name}.t_q", t_norm), heads)
    k_t = split_heads(linear(params, f"{name}.t_k", t_norm), heads)
    v_t = split_heads(linear(params, f"{name}.t_v", t_norm), heads)
    q_v = split_heads(linear(params, f"{name}.v_q", v_norm), heads)
    k_v = split_heads(linear(params, f"{name}.v_k", v_norm), heads)
    v_v = split_heads(linear(params, f"{name}.v_v", v_norm), heads)
    t_ctx, _ = scaled_dot_attention(q_t, k_v, v_v)
    v_ctx, _ = scaled_dot_attention(q_v, k_t, v_t)
    text = text_states + linear(params, f"{name}.t_o", merge_heads(t_ctx))
    vis = visual_states + linear(params, f"{name}.v_o", merge_heads(v_ctx))
    text = text + ffn(params, f"{name}.t_ff", layer_norm(params, f"{name}.t_ln2", text))
    vis = vis + ffn(params, f"{name}.v_ff", layer_norm(params, f"{name}.v_ln2", vis))
    return text, vis


def _run_streams(params: ParamSet, config: LedBertConfig,
                 vis_tokens: Tensor | None, text_tokens: Tensor) -> tuple[Tensor, Tensor | None]:
    text, vis = text_tokens, vis_tokens
    co_layers = set(config.co_attention_layer_indices)
    for i in range(max(config.text_layers, config.visual_layers)):
        if i < config.text_layers:
            text = encoder_block(params, f"text.{i}", text, config.heads)
        if vis is not None and i < config.visual_layers:
            vis = encoder_block(params, f"vis.{i}", vis, config.heads)
        if vis is not None and i in co_layers:
            text, vis = co_attention(params, config, i, text, vis)
    text = layer_norm(params, "text_final_ln", text)
    if vis is not None:
        vis = layer_norm(params, "vis_final_ln", vis)
    return text, vis


def _pair_states(params: ParamSet, config: LedBertConfig,
                 panos: list[PanoObservation], token_ids) -> tuple[Tensor, Tensor]:
    """Batched final (h_cls, h_img) over N panos sharing one dialog:
    ((N, d_t), (N, d_v))."""
    for pano in panos:
        _check_lengths(config, token_ids, pano.k)
    n = len(panos)
    text = _embed_text(params, config, token_ids)
    text = ad.broadcast_to(text, (n,) + text.shape[1:])
    vis = _embed_visual(params, config, panos)
    text_states, vis_states = _run_streams(params, config, vis, text)
    return text_states[:, 0, :], vis_states[:, 0, :]


def _compatibility(params: ParamSet, config: LedBertConfig,
                   h_cls: Tensor, h_img: Tensor) -> Tensor:
    """Scores (N,) from batched stream representations: elementwise product
    through a single linear layer. If the stream widths differ, both are
    first projected to min(d_t, d_v)."""
    if config.d_t != config.d_v:
        h_cls = h_cls @ params["score_proj_t"]
        h_img = h_img @ params["score_proj_v"]
    fused = h_cls * h_img
    return ad.sum_(fused * params["score_w"], axis=-1) + params["score_b"]


def forward(params: ParamSet, config: LedBertConfig, pano: PanoObservation,
            token_ids) -> PairRepresentation:
    """Final representations for one dialog-node pair (inference)."""
    h_cls, h_img = _pair_states(params, config, [pano], token_ids)
    return PairRepresentation(h_cls.value[0].copy(), h_img.value[0].copy())


def score_pair(params: ParamSet, config: LedBertConfig, pano: PanoObservation,
               token_ids) -> float:
    """Compatibility score f(node, dialog) for one pair."""
    h_cls, h_img = _pair_states(params, config, [pano], token_ids)
    return float(_compatibility(params, config, h_cls, h_img).value[0])


def _sorted_panos(panos: list[PanoObservation]) -> list[PanoObservation]:
    ordered = sorted(panos, key=lambda p: p.node_id)
    if len({p.node_id for p in ordered}) != len(ordered):
        raise ValidationError("duplicate node ids among panoramas")
    return ordered


def _environment_scores(params: ParamSet, config: LedBertConfig,
                        panos: list[PanoObservation], token_ids) -> tuple[list[str], Tensor]:
    ordered = _sorted_panos(panos)
    h_cls, h_img = _pair_states(params, config, ordered, token_ids)
    return [p.node_id for p in ordered], _compatibility(params, config, h_cls, h_img)


def score_environment(params: ParamSet, config: LedBertConfig,
                      panos: list[PanoObservation], token_ids) -> np.ndarray:
    """Softmax-normalized distribution over an environment's nodes, ordered
    by lexicographic node id."""
    if not panos:
        raise ValidationError("score_environment requires at least one node")
    _, scores = _environment_scores(params, config, panos, token_ids)
    return ad.softmax(scores, axis=-1).value.copy()


def predict(params: ParamSet, config: LedBertConfig,
            panos: list[PanoObservation], token_ids) -> str:
    """Highest-scoring node id; ties resolve to the lexicographically
    smallest id (argmax over lexicographically ordered nodes)."""
    if not panos:
        raise ValidationError("predict requires at least one node")
    ids, scores = _environment_scores(params, config, panos, token_ids)
    return ids[int(np.argmax(scores.value))]


# ---------------------------------------------------------------------------
# losses


def _collect_grads(params: ParamSet, loss: Tensor) -> dict[str, np.ndarray]:
    params.zero_grads()
    ad.backward(loss)
    grads = params.grads()
    params.zero_grads()
    return grads


def localization_loss(params: ParamSet, config: LedBertConfig,
                      panos: list[PanoObservation], token_ids,
                      target_node: str) -> tuple[float, dict[str, np.ndarray]]:
    """Cross-entropy of the environment distribution against the target
    node: -log p(target). Returns the loss and gradients for all params."""
    ids, scores = _environment_scores(params, config, panos, token_ids)
    if target_node not in ids:
        raise ValidationError(f"target node {target_node!r} not among environment nodes")
    target_index = ids.index(target_node)
    log_probs = ad.log_softmax(scores, axis=-1)
    loss = -log_probs[target_index]
    return float(loss.value), _collect_grads(params, loss)


def select_mask_positions(token_ids, mask_rate: float,
                          rng: np.random.Generator) -> list[int]:
    """Positions to mask: ceil(mask_rate * L) of the L maskable positions
    (those holding non-special tokens), sampled without replacement."""
    maskable = [i for i, tid in enumerate(token_ids) if tid >= N_SPECIALS]
    if not maskable:
        raise ValidationError("no maskable (non-special) tokens in sequence")
    n_mask = math.ceil(mask_rate * len(maskable))
    chosen = rng.choice(len(maskable), size=n_mask, replace=False)
    return sorted(maskable[i] for i in chosen)


def mlm_loss(params: ParamSet, config: LedBertConfig,
             pano: PanoObservation | None, token_ids,
             rng: np.random.Generator) -> tuple[float, dict[str, np.ndarray]]:
    """Masked-token prediction: replaces the selected positions with MASK
    and scores the MLM head only at those positions. With ``pano`` given the
    visual stream and any co-attention layers provide context; with None the
    text stream runs alone."""
    token_ids = list(token_ids)
    positions = select_mask_positions(token_ids, config.mask_rate, rng)
    masked = list(token_ids)
    targets = []
    for pos in positions:
        targets.append(token_ids[pos])
        masked[pos] = MASK_ID
    vis, text = embed_inputs(params, config, pano, masked)
    text_states, _ = _run_streams(params, config, vis, text)
    flat = ad.reshape(text_states, text_states.shape[1:])  # (L+2, d_t)
    state_at_masks = flat[np.asarray(positions, dtype=np.int64) + 1]  # +1 for CLS
    logits = state_at_masks @ params["mlm_w"] + params["mlm_b"]
    log_probs = ad.log_softmax(logits, axis=-1)
    picked = log_probs[np.arange(len(positions)), np.asarray(targets, dtype=np.int64)]
    loss = -ad.mean(picked)
    return float(loss.value), _collect_grads(params, loss)


def alignment_loss(params: ParamSet, config: LedBertConfig,
                   pano: PanoObservation, token_ids,
                   is_matched: bool) -> tuple[float, dict[str, np.ndarray]]:
    """Binary cross-entropy of sigmoid(score) against the matched label.
    Mismatched pairs are produced by the caller (swapping the node or the
    dialog within a batch)."""
    h_cls, h_img = _pair_states(params, config, [pano], token_ids)
    score = _compatibility(params, config, h_cls, h_img)[0]
    # y*softplus(-s) + (1-y)*softplus(s), the stable form of BCE on logits
    loss = ad.softplus(-score) if is_matched else ad.softplus(score)
    return float(loss.value), _collect_grads(params, loss)
