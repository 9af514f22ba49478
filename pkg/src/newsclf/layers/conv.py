"""Valid 1-D convolution over time with relu and global max pooling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.newsclf.errors import DimensionError, SequenceTooShortError
from src.newsclf.layers.cache import ForwardCache, LayerGrads
from src.newsclf.params import LayerParams, ParamSet, glorot_uniform
from src.newsclf.tensor import DTYPE, Tensor


def conv_prefix(width: int) -> str:
    return f"conv{width}"


def add_conv_params(
    params: ParamSet, width: int, num_filters: int, input_dim: int, rng: np.random.Generator
) -> LayerParams:
    layer = params.view(conv_prefix(width))
    layer.add(
        "filters",
        glorot_uniform(rng, (num_filters, width, input_dim), width * input_dim, num_filters),
    )
    layer.add("bias", np.zeros(num_filters))
    return layer


@dataclass
class ConvCache(ForwardCache):
    layer: LayerParams
    windows: Tensor     # [P×w×d]
    pre: Tensor         # [P×F]
    argmax: np.ndarray  # [F]
    rows: int

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        filters = self.layer["filters"]
        num_filters, width, dim = filters.shape
        cols = np.arange(num_filters)
        # subgradient flows only through the winning position, and only if relu was active there
        g = grad_out * (self.pre[self.argmax, cols] > 0.0)
        grads = {
            "filters": g[:, None, None] * self.windows[self.argmax],
            "bias": g.copy(),
        }
        for name, grad in grads.items():
            self.layer.accumulate(name, grad)
        grad_seq = np.zeros((self.rows, dim), dtype=DTYPE)
        positions = self.argmax[:, None] + np.arange(width)[None, :]
        np.add.at(grad_seq, positions, g[:, None, None] * filters)
        return LayerGrads(grad_seq, {self.layer.key(n): v for n, v in grads.items()})


def conv1d_maxpool(seq: Tensor, layer: LayerParams) -> tuple[Tensor, ConvCache]:
    """out_f = max_p relu(<filters_f, seq[p:p+w]> + bias_f); ties pick the earliest position."""
    filters = layer["filters"]
    num_filters, width, dim = filters.shape
    if seq.ndim != 2 or seq.shape[1] != dim:
        raise DimensionError(f"sequence {seq.shape} incompatible with filters {filters.shape}")
    if seq.shape[0] < width:
        raise SequenceTooShortError(f"sequence of {seq.shape[0]} rows is shorter than window {width}")
    windows = sliding_window_view(seq, (width, dim))[:, 0]
    pre = np.einsum("pwd,fwd->pf", windows, filters) + layer["bias"]
    act = np.maximum(pre, 0.0)
    argmax = np.argmax(act, axis=0)
    out = act[argmax, np.arange(num_filters)]
    return out, ConvCache(layer=layer, windows=windows, pre=pre, argmax=argmax, rows=seq.shape[0])
