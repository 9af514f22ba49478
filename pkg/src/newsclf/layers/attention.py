"""Additive attention pooling over a sequence of hidden states.

Row form, for the valid prefix H_v = H[:length]:

    U = tanh(H_v @ W_w + b_w)        [L×a]
    scores = U @ u_w                 [L]
    alpha = softmax(scores)          [L], zero on pad rows
    s = alpha @ H_v                  [n]

Parameters live under ``attn.``: ``W_w`` [n×a], ``b_w`` [a], ``u_w`` [a].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.newsclf.errors import DimensionError, EmptySequenceError
from src.newsclf.layers.cache import ForwardCache, LayerGrads
from src.newsclf.params import LayerParams, ParamSet, glorot_uniform
from src.newsclf.tensor import DTYPE, Tensor, softmax_rows

PREFIX = "attn"


def add_attention_params(
    params: ParamSet, input_dim: int, attention_dim: int, rng: np.random.Generator, prefix: str = PREFIX
) -> LayerParams:
    layer = params.view(prefix)
    layer.add("W_w", glorot_uniform(rng, (input_dim, attention_dim), input_dim, attention_dim))
    layer.add("b_w", np.zeros(attention_dim))
    layer.add("u_w", glorot_uniform(rng, (attention_dim,), attention_dim, 1))
    return layer


@dataclass
class AttentionWeightsCache(ForwardCache):
    layer: LayerParams
    h_valid: Tensor     # [L×n]
    u: Tensor           # [L×a]
    alpha: Tensor       # [L]
    rows: int

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        """*grad_out* is dJ/dalpha over all T rows; pad entries are ignored."""
        length = self.alpha.shape[0]
        d_alpha = grad_out[:length]
        a = self.alpha
        d_scores = a * (d_alpha - a @ d_alpha)
        u_w = self.layer["u_w"]
        d_pre = np.outer(d_scores, u_w) * (1.0 - self.u * self.u)
        grads = {
            "W_w": self.h_valid.T @ d_pre,
            "b_w": d_pre.sum(axis=0),
            "u_w": self.u.T @ d_scores,
        }
        for name, g in grads.items():
            self.layer.accumulate(name, g)
        grad_h = np.zeros((self.rows, self.h_valid.shape[1]), dtype=DTYPE)
        grad_h[:length] = d_pre @ self.layer["W_w"].T
        return LayerGrads(grad_h, {self.layer.key(n): g for n, g in grads.items()})


def attention_weights(H: Tensor, length: int, layer: LayerParams) -> tuple[Tensor, AttentionWeightsCache]:
    """Softmax attention weights over the first *length* rows of *H*; returns alpha [T]."""
    if length < 1:
        raise EmptySequenceError("attention over an all-pad sequence")
    if length > H.shape[0]:
        raise DimensionError(f"length {length} exceeds sequence of {H.shape[0]} rows")
    W_w = layer["W_w"]
    if H.shape[1] != W_w.shape[0]:
        raise DimensionError(f"hidden states {H.shape} incompatible with W_w {W_w.shape}")
    h_valid = H[:length]
    u = np.tanh(h_valid @ W_w + layer["b_w"])
    alpha_valid = softmax_rows(u @ layer["u_w"])
    alpha = np.zeros(H.shape[0], dtype=DTYPE)
    alpha[:length] = alpha_valid
    return alpha, AttentionWeightsCache(layer=layer, h_valid=h_valid, u=u, alpha=alpha_valid, rows=H.shape[0])


@dataclass
class AttentionPoolCache(ForwardCache):
    weights: AttentionWeightsCache
    h_valid: Tensor

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        rows = self.weights.rows
        d_alpha = np.zeros(rows, dtype=DTYPE)
        d_alpha[: self.h_valid.shape[0]] = self.h_valid @ grad_out
        through_alpha = self.weights.backward(d_alpha)
        grad_h = through_alpha.grad_in
        grad_h[: self.h_valid.shape[0]] += np.outer(self.weights.alpha, grad_out)
        return LayerGrads(grad_h, through_alpha.params)


def attention_pool(H: Tensor, length: int, layer: LayerParams) -> tuple[Tensor, Tensor, AttentionPoolCache]:
    """Pool *H* [T×n] into s [n]; returns (s, alpha [T], cache)."""
    alpha, weights_cache = attention_weights(H, length, layer)
    h_valid = H[:length]
    s = weights_cache.alpha @ h_valid
    return s, alpha, AttentionPoolCache(weights=weights_cache, h_valid=h_valid)
