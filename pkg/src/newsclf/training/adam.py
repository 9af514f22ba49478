"""Adam with bias correction.

    m = β1·m + (1−β1)·g
    v = β2·v + (1−β2)·g²
    θ -= lr · (m / (1−β1^t)) / (√(v / (1−β2^t)) + ε)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.newsclf.errors import DimensionError, NumericError
from src.newsclf.params import ParamSet
from src.newsclf.tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, Tensor] = field(default_factory=dict)
    v: dict[str, Tensor] = field(default_factory=dict)


def adam_step(params: ParamSet, grads: Optional[dict[str, Tensor]] = None, state: Optional[AdamState] = None) -> AdamState:
    """Apply one update to every trainable parameter in place; returns *state* with t advanced by one.

    Every gradient is checked before anything is touched, so a non-finite
    entry leaves parameters and moments unchanged.
    """
    state = AdamState() if state is None else state
    grads = params.grads if grads is None else grads
    names = params.trainable()
    for name in names:
        g = grads[name]
        if g.shape != params[name].shape:
            raise DimensionError(f"gradient for '{name}' has shape {g.shape}, parameter {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient entry in parameter '{name}'")

    state.t += 1
    bias1 = 1.0 - state.beta1**state.t
    bias2 = 1.0 - state.beta2**state.t
    for name in names:
        g = grads[name]
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[name][...] -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    return state
