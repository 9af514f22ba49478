"""One round of GCN-style neighbour aggregation with its analytic backward.

    h'_i = relu( Σ_{j: A_ij > 0} A_ij · (h_j W) + b )

``A`` holds raw nonnegative contribution weights; no row normalisation is
applied, callers may normalise beforehand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from src.newsclf.errors import DimensionError, GraphInputError
from src.newsclf.layers.cache import ForwardCache, LayerGrads
from src.newsclf.tensor import Tensor

Activation = Literal["relu", "identity"]


@dataclass(frozen=True)
class WeightedGraph:
    """Adjacency A [N×N] (A_ij = weight of node j's contribution to node i) and features H [N×f]."""

    adjacency: Tensor
    features: Tensor

    def __post_init__(self) -> None:
        A, H = self.adjacency, self.features
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise GraphInputError(f"adjacency must be square, got shape {A.shape}")
        if H.ndim != 2 or H.shape[0] != A.shape[0]:
            raise GraphInputError(f"features {H.shape} do not match {A.shape[0]} nodes")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(H)):
            raise GraphInputError("adjacency and features must be finite")
        negative = np.argwhere(A < 0)
        if negative.size:
            i, j = (int(v) for v in negative[0])
            raise GraphInputError(f"negative adjacency entry A[{i}][{j}] = {A[i, j]!r}")

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    def neighbours(self, i: int) -> list[int]:
        return np.flatnonzero(self.adjacency[i] > 0).tolist()


class GcnGrads(NamedTuple):
    grad_H: Tensor
    grad_W: Tensor
    grad_b: Tensor
    grad_A: Tensor


@dataclass
class GcnCache(ForwardCache):
    graph: WeightedGraph
    W: Tensor
    hw: Tensor     # H @ W
    pre: Tensor    # A @ hw + b
    activation: Activation

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        A, H = self.graph.adjacency, self.graph.features
        d_pre = grad_out * (self.pre > 0.0) if self.activation == "relu" else grad_out
        d_hw = A.T @ d_pre
        grads = {
            "W": H.T @ d_hw,
            "b": d_pre.sum(axis=0),
            "A": (d_pre @ self.hw.T) * (A > 0.0),
        }
        return LayerGrads(d_hw @ self.W.T, grads)


def gcn_aggregate(
    graph: WeightedGraph, W: Tensor, b: Tensor, activation: Activation = "relu"
) -> tuple[Tensor, GcnCache]:
    """Aggregate transformed neighbour features; ``activation="identity"`` skips the relu."""
    H = graph.features
    if W.ndim != 2 or W.shape[0] != H.shape[1] or b.shape != (W.shape[1],):
        raise DimensionError(f"features {H.shape} incompatible with W {W.shape} and b {b.shape}")
    hw = H @ W
    pre = graph.adjacency @ hw + b
    out = np.maximum(pre, 0.0) if activation == "relu" else pre.copy()
    return out, GcnCache(graph=graph, W=W, hw=hw, pre=pre, activation=activation)


def gcn_backward(cache: GcnCache, grad_out: Tensor) -> GcnGrads:
    """Gradients w.r.t. H, W, b and A; entries with A_ij = 0 carry no adjacency gradient."""
    grads = cache.backward(grad_out)
    return GcnGrads(
        grad_H=grads.grad_in,
        grad_W=grads.params["W"],
        grad_b=grads.params["b"],
        grad_A=grads.params["A"],
    )
