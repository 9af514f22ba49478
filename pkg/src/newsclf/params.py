"""Named parameter storage with matching gradient slots."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from src.newsclf.errors import DimensionError, ParameterError
from src.newsclf.tensor import DTYPE, Tensor


@dataclass
class ParamSet:
    """Ordered name → tensor map; every value has a same-shaped gradient slot.

    Insertion order is the enumeration order used by the optimizer, by the
    flat-vector views and by checkpoints, so it must stay fixed per config.
    Names in ``frozen`` are excluded from gradients, updates and the L2 term.
    """

    values: dict[str, Tensor] = field(default_factory=dict)
    grads: dict[str, Tensor] = field(default_factory=dict)
    frozen: set[str] = field(default_factory=set)

    def add(self, name: str, value: Tensor) -> Tensor:
        if name in self.values:
            raise ParameterError(f"parameter '{name}' already registered")
        value = np.ascontiguousarray(value, dtype=DTYPE)
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def __getitem__(self, name: str) -> Tensor:
        return self.values[name]

    def __contains__(self, name: object) -> bool:
        return name in self.values

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def names(self) -> list[str]:
        return list(self.values)

    def trainable(self) -> list[str]:
        return [n for n in self.values if n not in self.frozen]

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {n: tuple(v.shape) for n, v in self.values.items()}

    def count(self) -> int:
        return int(sum(v.size for v in self.values.values()))

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def accumulate(self, name: str, grad: Tensor) -> None:
        if name in self.frozen:
            return
        slot = self.grads[name]
        if grad.shape != slot.shape:
            raise DimensionError(f"gradient for '{name}' has shape {grad.shape}, expected {slot.shape}")
        slot += grad

    def sum_of_squares(self) -> float:
        """‖θ‖²_F over trainable parameters."""
        return float(sum(np.sum(self.values[n] ** 2) for n in self.trainable()))

    def add_l2_grad(self, lam: float) -> None:
        if lam == 0.0:
            return
        for n in self.trainable():
            self.grads[n] += 2.0 * lam * self.values[n]

    def view(self, prefix: str) -> "LayerParams":
        return LayerParams(self, prefix)

    # ── flat views (gradient checking) ───────────────────────────────────

    def flatten(self, names: list[str] | None = None) -> Tensor:
        names = self.names() if names is None else names
        return np.concatenate([self.values[n].ravel() for n in names])

    def flat_grad(self, names: list[str] | None = None) -> Tensor:
        names = self.names() if names is None else names
        return np.concatenate([self.grads[n].ravel() for n in names])

    def assign_flat(self, vector: Tensor, names: list[str] | None = None) -> None:
        names = self.names() if names is None else names
        offset = 0
        for n in names:
            v = self.values[n]
            v[...] = vector[offset:offset + v.size].reshape(v.shape)
            offset += v.size
        if offset != vector.size:
            raise DimensionError(f"flat vector has {vector.size} entries, parameters need {offset}")

    def snapshot(self) -> dict[str, Tensor]:
        return {n: v.copy() for n, v in self.values.items()}

    def restore(self, snapshot: dict[str, Tensor]) -> None:
        for n, v in snapshot.items():
            self.values[n][...] = v


@dataclass(frozen=True)
class LayerParams:
    """One layer's slice of a ParamSet, addressed by short names (``W``, ``b_v`` …)."""

    store: ParamSet
    prefix: str

    def key(self, name: str) -> str:
        return f"{self.prefix}.{name}"

    def __getitem__(self, name: str) -> Tensor:
        return self.store.values[self.key(name)]

    def add(self, name: str, value: Tensor) -> Tensor:
        return self.store.add(self.key(name), value)

    def accumulate(self, name: str, grad: Tensor) -> None:
        self.store.accumulate(self.key(name), grad)

    def is_frozen(self, name: str) -> bool:
        return self.key(name) in self.store.frozen


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
    """uniform(−r, r) with r = √(6/(fan_in+fan_out))."""
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=shape)
