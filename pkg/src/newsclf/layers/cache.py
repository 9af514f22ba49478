"""Single-use forward caches and the generic backward entry point."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import NamedTuple, Optional

from src.newsclf.errors import StateError
from src.newsclf.tensor import Tensor


class LayerGrads(NamedTuple):
    """Gradient w.r.t. the layer input (None for id inputs) and per-parameter gradients.

    Parameter gradients are also accumulated into the owning ParamSet slots.
    """

    grad_in: Optional[Tensor]
    params: dict[str, Tensor]


class ForwardCache(ABC):
    """Activations stored by a forward call; valid for exactly one backward."""

    _consumed: bool = False

    @property
    def consumed(self) -> bool:
        return self._consumed

    def backward(self, grad_out: Tensor) -> LayerGrads:
        self._claim()
        return self._backward(grad_out)

    def _claim(self) -> None:
        if self._consumed:
            raise StateError(f"{type(self).__name__} was already consumed by a backward pass")
        self._consumed = True

    @abstractmethod
    def _backward(self, grad_out: Tensor) -> LayerGrads: ...


def layer_backward(cache: ForwardCache, grad_out: Tensor) -> LayerGrads:
    """Backpropagate *grad_out* through the layer that produced *cache*."""
    return cache.backward(grad_out)
