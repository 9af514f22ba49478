"""Dense tensor kernels, seeded RNG and the finite-difference gradient checker.

A Tensor is a float64 numpy array of rank 1-3 stored row-major (C order).
The RNG is numpy's PCG64 bit generator behind ``numpy.random.Generator``;
equal seeds give equal draw sequences on every platform, which is what makes
splits, dropout masks and checkpoints replay bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable, Literal

import anyio
import numpy as np
import numpy.typing as npt
from scipy.special import expit, softmax

from src.newsclf.errors import DimensionError, DomainError, NumericError

Tensor = npt.NDArray[np.float64]
IdArray = npt.NDArray[np.int64]

DTYPE = np.float64

ElementwiseFn = Literal["tanh", "sigmoid", "relu", "exp", "log"]


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64-backed generator; the algorithm is part of the reproducibility contract."""
    return np.random.Generator(np.random.PCG64(seed))


def as_tensor(values: object) -> Tensor:
    """Convert *values* to a contiguous float64 tensor of rank 1-3 with nonzero dims."""
    arr = np.asarray(values, dtype=DTYPE)
    if arr.ndim not in (1, 2, 3):
        raise DimensionError(f"tensor rank must be 1, 2 or 3, got shape {arr.shape}")
    if any(d < 1 for d in arr.shape):
        raise DimensionError(f"tensor dimensions must be >= 1, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of an [m×k] and a [k×n] tensor."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def _relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


_ELEMENTWISE: dict[str, Callable[[Tensor], Tensor]] = {
    "tanh": np.tanh,
    "sigmoid": expit,
    "relu": _relu,
    "exp": np.exp,
    "log": np.log,
}


def elementwise(fn: ElementwiseFn, x: Tensor) -> Tensor:
    """Apply one of tanh/sigmoid/relu/exp/log entrywise."""
    try:
        kernel = _ELEMENTWISE[fn]
    except KeyError:
        raise DomainError(f"unknown elementwise function '{fn}'") from None
    if fn == "log":
        bad = np.argwhere(~(x > 0))
        if bad.size:
            idx = tuple(int(i) for i in bad[0])
            raise DomainError(f"log of nonpositive entry {x[idx]!r} at index {idx}")
    return kernel(x)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax (last axis) with per-row max subtraction."""
    if np.isnan(x).any():
        raise NumericError("softmax input contains NaN")
    return softmax(x, axis=-1)


# ── gradient checking ────────────────────────────────────────────────────


@dataclass
class GradCheckReport:
    """Per-coordinate comparison of analytic and central-difference gradients."""

    analytic: Tensor
    numeric: Tensor
    rel_err: Tensor
    tol: float

    @property
    def flagged(self) -> npt.NDArray[np.bool_]:
        return self.rel_err > self.tol

    @property
    def max_rel_err(self) -> float:
        return float(self.rel_err.max()) if self.rel_err.size else 0.0

    @property
    def passed(self) -> bool:
        return not bool(self.flagged.any())


def relative_error(analytic: Tensor, numeric: Tensor) -> Tensor:
    """|a − n| / max(|a|, |n|, 1e-8), entrywise."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def _central_difference(f: Callable[[Tensor], float], theta: Tensor, i: int, epsilon: float) -> float:
    plus = theta.copy()
    plus[i] += epsilon
    minus = theta.copy()
    minus[i] -= epsilon
    f_plus = f(plus)
    f_minus = f(minus)
    if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
        raise NumericError(f"objective is not finite around coordinate {i}")
    return (f_plus - f_minus) / (2.0 * epsilon)


async def _numeric_parallel(
    f: Callable[[Tensor], float], theta: Tensor, epsilon: float, threads: int
) -> Tensor:
    out = np.zeros(theta.size, dtype=DTYPE)
    limiter = anyio.CapacityLimiter(threads)

    async def one(i: int) -> None:
        out[i] = await anyio.to_thread.run_sync(
            partial(_central_difference, f, theta, i, epsilon), limiter=limiter
        )

    async with anyio.create_task_group() as tg:
        for i in range(theta.size):
            tg.start_soon(one, i)
    return out


def grad_check(
    f: Callable[[Tensor], float],
    theta: Tensor,
    analytic: Tensor,
    epsilon: float = 1e-5,
    tol: float = 1e-4,
    threads: int = 1,
) -> GradCheckReport:
    """Compare *analytic* with central differences of *f* at *theta*.

    *theta* and *analytic* are flattened; *f* receives a perturbed flat copy
    and must not mutate it. With ``threads > 1`` coordinates are evaluated on
    worker threads, so *f* must then be safe to call concurrently.
    """
    flat = np.ascontiguousarray(theta, dtype=DTYPE).ravel()
    grad = np.ascontiguousarray(analytic, dtype=DTYPE).ravel()
    if grad.shape != flat.shape:
        raise DimensionError(f"analytic gradient shape {analytic.shape} != theta shape {theta.shape}")
    if threads > 1:
        numeric = anyio.run(_numeric_parallel, f, flat, epsilon, threads)
    else:
        numeric = np.array(
            [_central_difference(f, flat, i, epsilon) for i in range(flat.size)], dtype=DTYPE
        )
    return GradCheckReport(analytic=grad, numeric=numeric, rel_err=relative_error(grad, numeric), tol=tol)
