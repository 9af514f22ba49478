"""Regularized classification losses and their gradients.

``ce``:  J = −(1/m) Σ_i t_i · log(max(y_i, 1e-12)) + λ‖θ‖²
``mse``: J =  (1/m) Σ_i ‖y_i − t_i‖²              + λ‖θ‖²

θ covers the trainable parameters only; the L2 gradient 2λθ is added by
``ParamSet.add_l2_grad``.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np

from src.newsclf.errors import DimensionError, LabelError
from src.newsclf.params import ParamSet
from src.newsclf.tensor import Tensor

LossKind = Literal["ce", "mse"]

LOG_FLOOR = 1e-12


def one_hot(labels: np.ndarray, num_classes: int) -> Tensor:
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def check_one_hot(t: Tensor) -> None:
    rows = np.atleast_2d(t)
    binary = np.all((rows == 0.0) | (rows == 1.0), axis=1)
    single = rows.sum(axis=1) == 1.0
    bad = np.flatnonzero(~(binary & single))
    if bad.size:
        raise LabelError(f"target row {int(bad[0])} is not one-hot: {rows[bad[0]].tolist()}")


def _rows(y: Tensor, t: Tensor) -> tuple[Tensor, Tensor]:
    y2, t2 = np.atleast_2d(y), np.atleast_2d(t)
    if y2.shape != t2.shape:
        raise DimensionError(f"predictions {y.shape} and targets {t.shape} differ in shape")
    check_one_hot(t2)
    return y2, t2


def l2_term(theta: Optional[ParamSet], lam: float) -> float:
    if theta is None or lam == 0.0:
        return 0.0
    return lam * theta.sum_of_squares()


def loss_ce_l2(
    y: Tensor, t: Tensor, theta: Optional[ParamSet] = None, lam: float = 0.0, m: Optional[int] = None
) -> float:
    """Mean cross-entropy over the *m* rows of *y* plus λ‖θ‖²."""
    y2, t2 = _rows(y, t)
    m = y2.shape[0] if m is None else m
    data = -float(np.sum(t2 * np.log(np.maximum(y2, LOG_FLOOR)))) / m
    return data + l2_term(theta, lam)


def loss_mse_l2(
    y: Tensor, t: Tensor, theta: Optional[ParamSet] = None, lam: float = 0.0, m: Optional[int] = None
) -> float:
    """Mean sum-of-squares error over the *m* rows of *y* plus λ‖θ‖²."""
    y2, t2 = _rows(y, t)
    m = y2.shape[0] if m is None else m
    return float(np.sum((y2 - t2) ** 2)) / m + l2_term(theta, lam)


def regularized_loss(
    kind: LossKind, y: Tensor, t: Tensor, theta: Optional[ParamSet], lam: float, m: Optional[int] = None
) -> float:
    fn = loss_mse_l2 if kind == "mse" else loss_ce_l2
    return fn(y, t, theta, lam, m)


def ce_grad_logits(y: Tensor, t: Tensor, m: int) -> Tensor:
    """dJ/dz for softmax followed by cross-entropy: (y − t)/m."""
    return (y - t) / m


def mse_grad_probs(y: Tensor, t: Tensor, m: int) -> Tensor:
    """dJ/dy for the sum-of-squares loss: 2(y − t)/m."""
    return 2.0 * (y - t) / m
