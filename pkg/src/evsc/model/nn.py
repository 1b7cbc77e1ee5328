"""Transformer pieces built on the tensor engine (post-norm, as in the original design)."""
from __future__ import annotations

import math

import numpy as np

from ..tensor import ParamStore, Tensor, add, layer_norm, matmul, mul, relu, reshape, softmax, transpose

LN_EPS = 1e-5


class Linear:
    def __init__(self, params: ParamStore, name: str, d_in: int, d_out: int, std: float | None = None):
        if std is None:
            self.w = params.xavier(f"{name}.W", (d_out, d_in))
        else:
            self.w = params.normal(f"{name}.W", (d_out, d_in), std=std)
        self.b = params.zeros(f"{name}.b", (d_out,))

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim == 1:
            return reshape(add(matmul(reshape(x, (1, x.shape[0])), transpose(self.w)), self.b), (self.b.shape[0],))
        return add(matmul(x, transpose(self.w)), self.b)


class LayerNorm:
    def __init__(self, params: ParamStore, name: str, d: int):
        self.gain = params.ones(f"{name}.gain", (d,))
        self.bias = params.zeros(f"{name}.bias", (d,))

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, LN_EPS)


class MultiHeadAttention:
    def __init__(self, params: ParamStore, name: str, d_model: int, heads: int):
        if d_model % heads:
            raise ValueError(f"{heads} heads do not divide d_model={d_model}")
        self.d_model, self.heads = d_model, heads
        self.q = Linear(params, f"{name}.q", d_model, d_model)
        self.k = Linear(params, f"{name}.k", d_model, d_model)
        self.v = Linear(params, f"{name}.v", d_model, d_model)
        self.o = Linear(params, f"{name}.o", d_model, d_model)

    def _split(self, x: Tensor) -> Tensor:
        lead, (n, d) = x.shape[:-2], x.shape[-2:]
        x = reshape(x, lead + (n, self.heads, d // self.heads))
        nd = x.ndim
        axes = list(range(nd - 3)) + [nd - 2, nd - 3, nd - 1]
        return transpose(x, axes)

    def _merge(self, x: Tensor) -> Tensor:
        nd = x.ndim
        axes = list(range(nd - 3)) + [nd - 2, nd - 3, nd - 1]
        x = transpose(x, axes)
        lead, n = x.shape[:-3], x.shape[-3]
        return reshape(x, lead + (n, self.d_model))

    def __call__(self, query: Tensor, memory: Tensor, mask: np.ndarray | None = None):
        """Returns (output, head-averaged attention weights as an array)."""
        q, k, v = self._split(self.q(query)), self._split(self.k(memory)), self._split(self.v(memory))
        scores = mul(matmul(q, transpose(k)), 1.0 / math.sqrt(self.d_model // self.heads))
        if mask is not None:
            scores = add(scores, Tensor(mask))
        attn = softmax(scores)
        out = self.o(self._merge(matmul(attn, v)))
        return out, attn.data.mean(axis=-3)


class FeedForward:
    def __init__(self, params: ParamStore, name: str, d_model: int, d_hidden: int):
        self.l1 = Linear(params, f"{name}.l1", d_model, d_hidden)
        self.l2 = Linear(params, f"{name}.l2", d_hidden, d_model)

    def __call__(self, x: Tensor) -> Tensor:
        return self.l2(relu(self.l1(x)))


class EncoderLayer:
    """x -> LN(x + MHA(x)) -> LN(. + FFN(.))"""

    def __init__(self, params: ParamStore, name: str, d_model: int, heads: int, d_hidden: int):
        self.attn = MultiHeadAttention(params, f"{name}.attn", d_model, heads)
        self.ln1 = LayerNorm(params, f"{name}.ln1", d_model)
        self.ffn = FeedForward(params, f"{name}.ffn", d_model, d_hidden)
        self.ln2 = LayerNorm(params, f"{name}.ln2", d_model)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None):
        a, weights = self.attn(x, x, mask)
        h = self.ln1(add(x, a))
        return self.ln2(add(h, self.ffn(h))), weights


class DecoderLayer:
    """Causal self-attention, cross-attention over memory, feed-forward; post-norm."""

    def __init__(self, params: ParamStore, name: str, d_model: int, heads: int, d_hidden: int):
        self.self_attn = MultiHeadAttention(params, f"{name}.self_attn", d_model, heads)
        self.ln1 = LayerNorm(params, f"{name}.ln1", d_model)
        self.cross_attn = MultiHeadAttention(params, f"{name}.cross_attn", d_model, heads)
        self.ln2 = LayerNorm(params, f"{name}.ln2", d_model)
        self.ffn = FeedForward(params, f"{name}.ffn", d_model, d_hidden)
        self.ln3 = LayerNorm(params, f"{name}.ln3", d_model)

    def __call__(self, x: Tensor, memory: Tensor, causal: np.ndarray) -> Tensor:
        a, _ = self.self_attn(x, x, causal)
        h = self.ln1(add(x, a))
        c, _ = self.cross_attn(h, memory)
        h = self.ln2(add(h, c))
        return self.ln3(add(h, self.ffn(h)))


def causal_mask(n: int) -> np.ndarray:
    """Additive mask: 0 on and below the diagonal, -1e9 above."""
    return np.triu(np.full((n, n), -1e9), k=1)
