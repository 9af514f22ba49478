"""Dense projection followed by softmax: y = softmax(W_v v + b_v)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.newsclf.errors import DimensionError
from src.newsclf.layers.cache import ForwardCache, LayerGrads
from src.newsclf.params import LayerParams, ParamSet, glorot_uniform
from src.newsclf.tensor import Tensor, softmax_rows

PREFIX = "head"


def add_dense_params(
    params: ParamSet, input_dim: int, num_classes: int, rng: np.random.Generator, prefix: str = PREFIX
) -> LayerParams:
    layer = params.view(prefix)
    layer.add("W_v", glorot_uniform(rng, (num_classes, input_dim), input_dim, num_classes))
    layer.add("b_v", np.zeros(num_classes))
    return layer


@dataclass
class DenseSoftmaxCache(ForwardCache):
    layer: LayerParams
    v: Tensor
    y: Tensor

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        """*grad_out* is dJ/dy; pushed through the softmax Jacobian diag(y) − y yᵀ."""
        y = self.y
        return self._from_logits(y * (grad_out - y @ grad_out))

    def backward_logits(self, grad_logits: Tensor) -> LayerGrads:
        """Backward entry taking dJ/dz directly, e.g. (y − t)/m for softmax + cross-entropy."""
        self._claim()
        return self._from_logits(grad_logits)

    def _from_logits(self, dz: Tensor) -> LayerGrads:
        grads = {"W_v": np.outer(dz, self.v), "b_v": dz.copy()}
        for name, g in grads.items():
            self.layer.accumulate(name, g)
        return LayerGrads(self.layer["W_v"].T @ dz, {self.layer.key(n): g for n, g in grads.items()})


def dense_softmax(v: Tensor, layer: LayerParams) -> tuple[Tensor, DenseSoftmaxCache]:
    W_v = layer["W_v"]
    if v.ndim != 1 or v.shape[0] != W_v.shape[1]:
        raise DimensionError(f"feature vector {v.shape} incompatible with W_v {W_v.shape}")
    y = softmax_rows(W_v @ v + layer["b_v"])
    return y, DenseSoftmaxCache(layer=layer, v=v, y=y)
