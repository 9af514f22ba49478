"""Simple RNN and LSTM cells, sequence runners with BPTT, and the bidirectional wrapper.

Parameter layout per recurrent block (prefix ``p``):

* RNN:  ``p.W`` [h×d], ``p.U`` [h×h], ``p.b`` [h]
* LSTM: ``p.W`` [4h×d], ``p.U`` [4h×h], ``p.b`` [4h], each stacking the
  input, forget, output and candidate gate blocks in that order.

Sequences are [T×d] matrices; only the first ``length`` rows are processed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from scipy.special import expit

from src.newsclf.errors import DimensionError, EmptySequenceError
from src.newsclf.layers.cache import ForwardCache, LayerGrads
from src.newsclf.params import LayerParams, ParamSet, glorot_uniform
from src.newsclf.tensor import DTYPE, Tensor

CellType = Literal["rnn", "lstm"]

FORGET_BIAS = 1.0


def add_rnn_params(params: ParamSet, prefix: str, input_dim: int, hidden: int, rng: np.random.Generator) -> LayerParams:
    layer = params.view(prefix)
    layer.add("W", glorot_uniform(rng, (hidden, input_dim), input_dim, hidden))
    layer.add("U", glorot_uniform(rng, (hidden, hidden), hidden, hidden))
    layer.add("b", np.zeros(hidden))
    return layer


def add_lstm_params(params: ParamSet, prefix: str, input_dim: int, hidden: int, rng: np.random.Generator) -> LayerParams:
    layer = params.view(prefix)
    layer.add("W", glorot_uniform(rng, (4 * hidden, input_dim), input_dim, hidden))
    layer.add("U", glorot_uniform(rng, (4 * hidden, hidden), hidden, hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = FORGET_BIAS
    layer.add("b", b)
    return layer


def _check_input(layer: LayerParams, x: Tensor, h_prev: Tensor, gates: int) -> int:
    W, U = layer["W"], layer["U"]
    hidden = U.shape[1]
    if x.shape[-1] != W.shape[1] or h_prev.shape != (hidden,) or W.shape[0] != gates * hidden:
        raise DimensionError(
            f"input {x.shape} / state {h_prev.shape} incompatible with W {W.shape}, U {U.shape}"
        )
    return hidden


# ── single steps ─────────────────────────────────────────────────────────


def rnn_cell_step(x_t: Tensor, h_prev: Tensor, layer: LayerParams) -> Tensor:
    """h_t = tanh(W x_t + U h_prev + b)."""
    _check_input(layer, x_t, h_prev, gates=1)
    return np.tanh(layer["W"] @ x_t + layer["U"] @ h_prev + layer["b"])


def _lstm_gates(z: Tensor, hidden: int) -> Tensor:
    act = np.empty_like(z)
    act[: 3 * hidden] = expit(z[: 3 * hidden])
    act[3 * hidden:] = np.tanh(z[3 * hidden:])
    return act


def lstm_cell_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, layer: LayerParams) -> tuple[Tensor, Tensor]:
    """Standard four-gate LSTM step without peepholes; returns (h_t, c_t)."""
    hidden = _check_input(layer, x_t, h_prev, gates=4)
    if c_prev.shape != (hidden,):
        raise DimensionError(f"cell state {c_prev.shape} incompatible with hidden size {hidden}")
    act = _lstm_gates(layer["W"] @ x_t + layer["U"] @ h_prev + layer["b"], hidden)
    i, f, o, g = act[:hidden], act[hidden:2 * hidden], act[2 * hidden:3 * hidden], act[3 * hidden:]
    c_t = f * c_prev + i * g
    return o * np.tanh(c_t), c_t


# ── sequence runners ─────────────────────────────────────────────────────


@dataclass
class RNNSequenceCache(ForwardCache):
    layer: LayerParams
    x: Tensor          # [L×d] in processing order
    h: Tensor          # [L+1×h], row 0 is the zero initial state
    reverse: bool

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        W, U = self.layer["W"], self.layer["U"]
        dH = grad_out[::-1] if self.reverse else grad_out
        steps, hidden = dH.shape
        dZ = np.zeros((steps, hidden), dtype=DTYPE)
        dU = np.zeros_like(U)
        dh_next = np.zeros(hidden, dtype=DTYPE)
        for t in range(steps - 1, -1, -1):
            h_t = self.h[t + 1]
            da = (dH[t] + dh_next) * (1.0 - h_t * h_t)
            dZ[t] = da
            dU += np.outer(da, self.h[t])
            dh_next = U.T @ da
        grads = {"W": dZ.T @ self.x, "U": dU, "b": dZ.sum(axis=0)}
        for name, g in grads.items():
            self.layer.accumulate(name, g)
        dX = dZ @ W
        return LayerGrads(dX[::-1] if self.reverse else dX, {self.layer.key(n): g for n, g in grads.items()})


@dataclass
class LSTMSequenceCache(ForwardCache):
    layer: LayerParams
    x: Tensor          # [L×d] in processing order
    h: Tensor          # [L+1×h], row 0 is the zero initial state
    c: Tensor          # [L+1×h], row 0 is the zero initial cell
    act: Tensor        # [L×4h] gate activations i, f, o, g
    reverse: bool

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        W, U = self.layer["W"], self.layer["U"]
        dH = grad_out[::-1] if self.reverse else grad_out
        steps, hidden = dH.shape
        dZ = np.zeros((steps, 4 * hidden), dtype=DTYPE)
        dU = np.zeros_like(U)
        dh_next = np.zeros(hidden, dtype=DTYPE)
        dc_next = np.zeros(hidden, dtype=DTYPE)
        for t in range(steps - 1, -1, -1):
            a = self.act[t]
            i, f, o, g = a[:hidden], a[hidden:2 * hidden], a[2 * hidden:3 * hidden], a[3 * hidden:]
            tc = np.tanh(self.c[t + 1])
            dh = dH[t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz = dZ[t]
            dz[:hidden] = dc * g * i * (1.0 - i)
            dz[hidden:2 * hidden] = dc * self.c[t] * f * (1.0 - f)
            dz[2 * hidden:3 * hidden] = dh * tc * o * (1.0 - o)
            dz[3 * hidden:] = dc * i * (1.0 - g * g)
            dU += np.outer(dz, self.h[t])
            dh_next = U.T @ dz
            dc_next = dc * f
        grads = {"W": dZ.T @ self.x, "U": dU, "b": dZ.sum(axis=0)}
        for name, g in grads.items():
            self.layer.accumulate(name, g)
        dX = dZ @ W
        return LayerGrads(dX[::-1] if self.reverse else dX, {self.layer.key(n): g for n, g in grads.items()})


SequenceCache = Union[RNNSequenceCache, LSTMSequenceCache]


def _valid_rows(seq: Tensor, length: int) -> Tensor:
    if length < 1:
        raise EmptySequenceError("recurrent layer needs at least one valid position")
    if length > seq.shape[0]:
        raise DimensionError(f"length {length} exceeds sequence of {seq.shape[0]} rows")
    return seq[:length]


def rnn_forward(seq: Tensor, length: int, layer: LayerParams, reverse: bool = False) -> tuple[Tensor, RNNSequenceCache]:
    """Run the simple RNN over the valid rows; returns hidden states [length×h] in position order."""
    x = _valid_rows(seq, length)
    x = x[::-1] if reverse else x
    hidden = _check_input(layer, x, np.zeros(layer["U"].shape[1]), gates=1)
    zx = x @ layer["W"].T + layer["b"]
    U = layer["U"]
    h = np.zeros((length + 1, hidden), dtype=DTYPE)
    for t in range(length):
        h[t + 1] = np.tanh(zx[t] + U @ h[t])
    out = h[1:][::-1] if reverse else h[1:]
    return out.copy(), RNNSequenceCache(layer=layer, x=x, h=h, reverse=reverse)


def lstm_forward(seq: Tensor, length: int, layer: LayerParams, reverse: bool = False) -> tuple[Tensor, LSTMSequenceCache]:
    """Run the LSTM over the valid rows; returns hidden states [length×h] in position order."""
    x = _valid_rows(seq, length)
    x = x[::-1] if reverse else x
    hidden = _check_input(layer, x, np.zeros(layer["U"].shape[1]), gates=4)
    zx = x @ layer["W"].T + layer["b"]
    U = layer["U"]
    h = np.zeros((length + 1, hidden), dtype=DTYPE)
    c = np.zeros((length + 1, hidden), dtype=DTYPE)
    act = np.empty((length, 4 * hidden), dtype=DTYPE)
    for t in range(length):
        a = _lstm_gates(zx[t] + U @ h[t], hidden)
        act[t] = a
        c[t + 1] = a[hidden:2 * hidden] * c[t] + a[:hidden] * a[3 * hidden:]
        h[t + 1] = a[2 * hidden:3 * hidden] * np.tanh(c[t + 1])
    out = h[1:][::-1] if reverse else h[1:]
    return out.copy(), LSTMSequenceCache(layer=layer, x=x, h=h, c=c, act=act, reverse=reverse)


def run_sequence(
    cell: CellType, seq: Tensor, length: int, layer: LayerParams, reverse: bool = False
) -> tuple[Tensor, SequenceCache]:
    runner = lstm_forward if cell == "lstm" else rnn_forward
    return runner(seq, length, layer, reverse)


# ── bidirectional ────────────────────────────────────────────────────────


@dataclass
class BidirectionalCache(ForwardCache):
    fwd: SequenceCache
    bwd: SequenceCache
    rows: int
    length: int
    hidden: int

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        h = self.hidden
        valid = grad_out[: self.length]
        fwd = self.fwd.backward(np.ascontiguousarray(valid[:, :h]))
        bwd = self.bwd.backward(np.ascontiguousarray(valid[:, h:]))
        d_seq = np.zeros((self.rows, fwd.grad_in.shape[1]), dtype=DTYPE)
        d_seq[: self.length] = fwd.grad_in + bwd.grad_in
        return LayerGrads(d_seq, {**fwd.params, **bwd.params})


def bidirectional_run(
    seq: Tensor,
    length: int,
    fwd_layer: LayerParams,
    bwd_layer: LayerParams,
    cell: CellType = "lstm",
) -> tuple[Tensor, BidirectionalCache]:
    """Concatenate forward and backward hidden states per position; pad rows are zero."""
    h_fwd, fwd_cache = run_sequence(cell, seq, length, fwd_layer, reverse=False)
    h_bwd, bwd_cache = run_sequence(cell, seq, length, bwd_layer, reverse=True)
    hidden = h_fwd.shape[1]
    out = np.zeros((seq.shape[0], 2 * hidden), dtype=DTYPE)
    out[:length, :hidden] = h_fwd
    out[:length, hidden:] = h_bwd
    return out, BidirectionalCache(fwd=fwd_cache, bwd=bwd_cache, rows=seq.shape[0], length=length, hidden=hidden)
