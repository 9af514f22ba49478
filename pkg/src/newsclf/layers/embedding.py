"""Embedding lookup."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.newsclf.errors import TokenIdError
from src.newsclf.layers.cache import ForwardCache, LayerGrads
from src.newsclf.params import LayerParams, ParamSet, glorot_uniform
from src.newsclf.tensor import IdArray, Tensor

PREFIX = "embed"


def add_embedding_params(
    params: ParamSet, vocab_size: int, dim: int, rng: np.random.Generator, pad_id: int = 0
) -> LayerParams:
    """Register ``embed.table`` [|V|×d]; rows drawn as a fan_in=1 weight matrix, pad row zeroed."""
    layer = params.view(PREFIX)
    table = glorot_uniform(rng, (vocab_size, dim), fan_in=1, fan_out=dim)
    table[pad_id] = 0.0
    layer.add("table", table)
    return layer


@dataclass
class EmbeddingCache(ForwardCache):
    ids: IdArray
    layer: LayerParams

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        if self.layer.is_frozen("table"):
            return LayerGrads(None, {})
        grad_table = np.zeros_like(self.layer["table"])
        np.add.at(grad_table, self.ids, grad_out)
        self.layer.accumulate("table", grad_table)
        return LayerGrads(None, {self.layer.key("table"): grad_table})


def embedding_forward(ids: IdArray, layer: LayerParams) -> tuple[Tensor, EmbeddingCache]:
    """Row i of the output is ``table[ids[i]]``."""
    table = layer["table"]
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        bad = int(ids[(ids < 0) | (ids >= table.shape[0])][0])
        raise TokenIdError(f"token id {bad} outside embedding table of {table.shape[0]} rows")
    return table[ids], EmbeddingCache(ids=ids, layer=layer)
