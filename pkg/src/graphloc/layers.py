"""Shared neural building blocks on top of the autodiff tape: parameter
registry, linear/layer-norm, multi-head attention, pre-norm transformer
blocks, and a single-layer LSTM.

Blocks use pre-normalization (LayerNorm on the sublayer input, residual
outside), so a sublayer whose output projection is zero contributes exactly
nothing: the residual path is the identity.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ValidationError

INIT_SCALE = 0.02
LN_EPS = 1e-5


class ParamSet:
    """Named, ordered collection of trainable tensors."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValidationError(f"duplicate parameter name {name!r}")
        tensor = ad.parameter(value)
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._params[name]
        except KeyError:
            raise ValidationError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    @property
    def names(self) -> list[str]:
        return sorted(self._params)

    def tensors(self) -> list[Tensor]:
        return [self._params[n] for n in self.names]

    def arrays(self) -> dict[str, np.ndarray]:
        """Current values, keyed by name (references, not copies)."""
        return {n: self._params[n].value for n in self.names}

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Copies of all accumulated gradients (zeros where untouched)."""
        out = {}
        for n in self.names:
            t = self._params[n]
            out[n] = np.zeros_like(t.value) if t.grad is None else t.grad.copy()
        return out

    def set_values(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place; shapes must match."""
        for name, arr in arrays.items():
            tensor = self[name]
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != tensor.value.shape:
                raise ValidationError(
                    f"shape mismatch for {name!r}: have {tensor.value.shape}, got {arr.shape}"
                )
            tensor.value = arr.copy()


# ---------------------------------------------------------------------------
# initialization helpers

def normal_init(params: ParamSet, rng: np.random.Generator, name: str, shape,
                scale: float = INIT_SCALE) -> Tensor:
    return params.add(name, rng.normal(0.0, scale, size=shape))


def zeros_init(params: ParamSet, name: str, shape) -> Tensor:
    return params.add(name, np.zeros(shape))


def init_linear(params: ParamSet, rng, name: str, d_in: int, d_out: int,
                bias: bool = True, scale: float | None = None) -> None:
    if scale is None:
        scale = 1.0 / math.sqrt(d_in)
    normal_init(params, rng, f"{name}.w", (d_in, d_out), scale)
    if bias:
        zeros_init(params, f"{name}.b", (d_out,))


def linear(params: ParamSet, name: str, x: Tensor) -> Tensor:
    out = x @ params[f"{name}.w"]
    if f"{name}.b" in params:
        out = out + params[f"{name}.b"]
    return out


def init_layer_norm(params: ParamSet, name: str, d: int) -> None:
    params.add(f"{name}.gain", np.ones(d))
    zeros_init(params, f"{name}.bias", (d,))


def layer_norm(params: ParamSet, name: str, x: Tensor) -> Tensor:
    mu = ad.mean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = ad.mean(centered * centered, axis=-1, keepdims=True)
    inv = ad.power(var + Tensor(LN_EPS), -0.5)
    return centered * inv * params[f"{name}.gain"] + params[f"{name}.bias"]


# ---------------------------------------------------------------------------
# attention

def split_heads(x: Tensor, heads: int) -> Tensor:
    """(B, T, d) -> (B, heads, T, d // heads)."""
    b, t, d = x.shape
    return ad.transpose(ad.reshape(x, (b, t, heads, d // heads)), (0, 2, 1, 3))


def merge_heads(x: Tensor) -> Tensor:
    """(B, heads, T, dh) -> (B, T, heads * dh)."""
    b, h, t, dh = x.shape
    return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (b, t, h * dh))


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> tuple[Tensor, Tensor]:
    """Per-head attention; q, k, v are (B, heads, T, dh). Returns the
    attended values and the attention weights."""
    dh = q.shape[-1]
    scores = (q @ ad.transpose(k, (0, 1, 3, 2))) * Tensor(1.0 / math.sqrt(dh))
    weights = ad.softmax(scores, axis=-1)
    return weights @ v, weights


def init_attention(params: ParamSet, rng, name: str, d_q_in: int, d_kv_in: int,
                   d_attn: int, d_out: int) -> None:
    init_linear(params, rng, f"{name}.q", d_q_in, d_attn)
    init_linear(params, rng, f"{name}.k", d_kv_in, d_attn)
    init_linear(params, rng, f"{name}.v", d_kv_in, d_attn)
    init_linear(params, rng, f"{name}.o", d_attn, d_out)


def attention(params: ParamSet, name: str, q_in: Tensor, kv_in: Tensor,
              heads: int, return_weights: bool = False):
    """Multi-head attention of ``q_in`` over ``kv_in`` (both (B, T, d))."""
    q = split_heads(linear(params, f"{name}.q", q_in), heads)
    k = split_heads(linear(params, f"{name}.k", kv_in), heads)
    v = split_heads(linear(params, f"{name}.v", kv_in), heads)
    ctx, weights = scaled_dot_attention(q, k, v)
    out = linear(params, f"{name}.o", merge_heads(ctx))
    if return_weights:
        return out, weights
    return out


# ---------------------------------------------------------------------------
# transformer blocks (pre-norm)

def init_ffn(params: ParamSet, rng, name: str, d: int, d_ff: int) -> None:
    init_linear(params, rng, f"{name}.in", d, d_ff)
    init_linear(params, rng, f"{name}.out", d_ff, d)


def ffn(params: ParamSet, name: str, x: Tensor) -> Tensor:
    return linear(params, f"{name}.out", ad.gelu(linear(params, f"{name}.in", x)))


def init_encoder_block(params: ParamSet, rng, name: str, d: int, heads: int,
                       d_ff: int) -> None:
    init_layer_norm(params, f"{name}.ln1", d)
    init_attention(params, rng, f"{name}.attn", d, d, d, d)
    init_layer_norm(params, f"{name}.ln2", d)
    init_ffn(params, rng, f"{name}.ff", d, d_ff)


def encoder_block(params: ParamSet, name: str, x: Tensor, heads: int) -> Tensor:
    """Self-attention block: residual around attention, then around the
    feed-forward, each with pre-normalization."""
    normed = layer_norm(params, f"{name}.ln1", x)
    h = x + attention(params, f"{name}.attn", normed, normed, heads)
    return h + ffn(params, f"{name}.ff", layer_norm(params, f"{name}.ln2", h))


# ---------------------------------------------------------------------------
# LSTM

def init_lstm(params: ParamSet, rng, name: str, d_in: int, hidden: int,
              scale: float | None = None) -> None:
    if scale is None:
        scale = 1.0 / math.sqrt(hidden)
    normal_init(params, rng, f"{name}.w_x", (d_in, 4 * hidden), scale)
    normal_init(params, rng, f"{name}.w_h", (hidden, 4 * hidden), scale)
    zeros_init(params, f"{name}.b", (4 * hidden,))


def lstm_run(params: ParamSet, name: str, xs: Tensor, hidden: int) -> Tensor:
    """Run a single-layer LSTM over ``xs`` of shape (T, d_in) from a zero
    initial state; returns the final hidden state (1, hidden)."""
    t_len = xs.shape[0]
    h = Tensor(np.zeros((1, hidden)))
    c = Tensor(np.zeros((1, hidden)))
    w_x, w_h, b = params[f"{name}.w_x"], params[f"{name}.w_h"], params[f"{name}.b"]
    for t in range(t_len):
        x_t = ad.reshape(xs[t], (1, xs.shape[1]))
        z = x_t @ w_x + h @ w_h + b
        i = ad.sigmoid(z[:, 0 * hidden:1 * hidden])
        f = ad.sigmoid(z[:, 1 * hidden:2 * hidden])
        g = ad.tanh(z[:, 2 * hidden:3 * hidden])
        o = ad.sigmoid(z[:, 3 * hidden:4 * hidden])
        c = f * c + i * g
        h = o * ad.tanh(c)
    return h
