"""Inverted dropout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from src.newsclf.errors import ParameterError
from src.newsclf.layers.cache import ForwardCache, LayerGrads
from src.newsclf.tensor import Tensor

Mode = Literal["train", "eval"]


@dataclass
class DropoutCache(ForwardCache):
    mask: Tensor

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        return LayerGrads(grad_out * self.mask, {})


def dropout(
    x: Tensor, rate: float, mode: Mode, rng: Optional[np.random.Generator] = None
) -> tuple[Tensor, DropoutCache]:
    """Train mode keeps each entry with probability 1 − rate and scales it by 1/(1 − rate).

    Eval mode (and rate 0) returns *x* itself with an all-ones mask.
    """
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return x, DropoutCache(mask=np.ones_like(x))
    if rng is None:
        raise ParameterError("train-mode dropout needs an rng")
    keep = rng.random(x.shape) >= rate
    mask = keep / (1.0 - rate)
    return x * mask, DropoutCache(mask=mask)
