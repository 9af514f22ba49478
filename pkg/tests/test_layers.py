"""Tests for the network layers: forward values, invariants and backward passes."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import expit

from src.newsclf.errors import (
    DimensionError,
    EmptySequenceError,
    LabelError,
    ParameterError,
    SequenceTooShortError,
    StateError,
    TokenIdError,
)
from src.newsclf.gradcheck import LAYER_CHECKS, check_layer
from src.newsclf.layers.attention import add_attention_params, attention_pool
from src.newsclf.layers.cache import layer_backward
from src.newsclf.layers.conv import add_conv_params, conv1d_maxpool
from src.newsclf.layers.dense import add_dense_params, dense_softmax
from src.newsclf.layers.dropout import dropout
from src.newsclf.layers.embedding import add_embedding_params, embedding_forward
from src.newsclf.layers.loss import ce_grad_logits, loss_ce_l2, loss_mse_l2, one_hot
from src.newsclf.layers.recurrent import (
    add_lstm_params,
    add_rnn_params,
    bidirectional_run,
    lstm_cell_step,
    rnn_cell_step,
)
from src.newsclf.params import ParamSet
from src.newsclf.tensor import grad_check, make_rng


def _zero(params: ParamSet) -> None:
    for name in params:
        params[name][...] = 0.0


class TestEmbedding:
    def test_pad_row_is_zero(self) -> None:
        params = ParamSet()
        layer = add_embedding_params(params, 10, 4, make_rng(0))
        out, _ = embedding_forward(np.array([0]), layer)
        np.testing.assert_array_equal(out, np.zeros((1, 4)))

    def test_repeated_ids_give_identical_rows(self) -> None:
        layer = add_embedding_params(ParamSet(), 10, 4, make_rng(0))
        out, _ = embedding_forward(np.array([2, 2]), layer)
        np.testing.assert_array_equal(out[0], out[1])

    def test_gradient_of_sum_marks_looked_up_rows(self) -> None:
        params = ParamSet()
        layer = add_embedding_params(params, 6, 3, make_rng(0))
        out, cache = embedding_forward(np.array([2, 4]), layer)
        grads = layer_backward(cache, np.ones_like(out))
        expected = np.zeros((6, 3))
        expected[[2, 4]] = 1.0
        np.testing.assert_array_equal(grads.params["embed.table"], expected)
        assert grads.grad_in is None

    def test_out_of_range_id(self) -> None:
        layer = add_embedding_params(ParamSet(), 5, 2, make_rng(0))
        with pytest.raises(TokenIdError, match="7"):
            embedding_forward(np.array([1, 7]), layer)

    def test_frozen_table_gets_no_gradient(self) -> None:
        params = ParamSet()
        layer = add_embedding_params(params, 5, 2, make_rng(0))
        params.frozen.add("embed.table")
        out, cache = embedding_forward(np.array([2]), layer)
        assert cache.backward(np.ones_like(out)).params == {}
        np.testing.assert_array_equal(params.grads["embed.table"], np.zeros((5, 2)))


class TestRecurrentCells:
    def test_rnn_zero_params(self) -> None:
        params = ParamSet()
        layer = add_rnn_params(params, "rnn", 3, 4, make_rng(0))
        _zero(params)
        h = rnn_cell_step(np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.1, -0.2, 0.4]), layer)
        np.testing.assert_array_equal(h, np.zeros(4))

    def test_rnn_identity_recurrence_passes_state_through(self) -> None:
        params = ParamSet()
        layer = add_rnn_params(params, "rnn", 3, 3, make_rng(0))
        _zero(params)
        params["rnn.U"][...] = np.eye(3)
        h_prev = np.array([0.01, -0.02, 0.03])
        np.testing.assert_allclose(rnn_cell_step(np.ones(3), h_prev, layer), np.tanh(h_prev))

    def test_lstm_zero_params_zero_state(self) -> None:
        params = ParamSet()
        layer = add_lstm_params(params, "lstm", 3, 2, make_rng(0))
        _zero(params)
        h, c = lstm_cell_step(np.ones(3), np.zeros(2), np.zeros(2), layer)
        np.testing.assert_array_equal(h, np.zeros(2))
        np.testing.assert_array_equal(c, np.zeros(2))

    def test_lstm_zero_params_closed_form(self) -> None:
        params = ParamSet()
        layer = add_lstm_params(params, "lstm", 3, 2, make_rng(0))
        _zero(params)
        c_prev = np.array([1.5, -0.8])
        h, c = lstm_cell_step(np.ones(3), np.zeros(2), c_prev, layer)
        np.testing.assert_allclose(c, 0.5 * c_prev)
        np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * c_prev))

    def test_lstm_forget_bias_initialised_to_one(self) -> None:
        params = ParamSet()
        add_lstm_params(params, "lstm", 3, 2, make_rng(0))
        np.testing.assert_array_equal(params["lstm.b"], [0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0])

    def test_dimension_mismatch(self) -> None:
        layer = add_rnn_params(ParamSet(), "rnn", 3, 4, make_rng(0))
        with pytest.raises(DimensionError):
            rnn_cell_step(np.ones(2), np.zeros(4), layer)


class TestBidirectional:
    def _layers(self, hidden: int = 3, dim: int = 2, shared: bool = False):
        params = ParamSet()
        rng = make_rng(5)
        fwd = add_lstm_params(params, "fwd", dim, hidden, rng)
        bwd = add_lstm_params(params, "bwd", dim, hidden, rng)
        if shared:
            for name in ("W", "U", "b"):
                params[f"bwd.{name}"][...] = params[f"fwd.{name}"]
        return fwd, bwd

    def test_single_token_sees_same_input(self) -> None:
        fwd, bwd = self._layers(shared=True)
        seq = np.array([[0.4, -0.7], [0.0, 0.0]])
        out, _ = bidirectional_run(seq, 1, fwd, bwd)
        np.testing.assert_allclose(out[0, :3], out[0, 3:])
        np.testing.assert_array_equal(out[1], np.zeros(6))

    def test_palindrome_symmetry(self) -> None:
        fwd, bwd = self._layers(shared=True)
        a, b, c = [0.5, -0.1], [-0.3, 0.9], [0.2, 0.2]
        seq = np.array([a, b, c, b, a, [0.0, 0.0]])
        length = 5
        out, _ = bidirectional_run(seq, length, fwd, bwd)
        for t in range(length):
            mirror = length - 1 - t
            np.testing.assert_allclose(out[t, :3], out[mirror, 3:], atol=1e-12)

    def test_rnn_cell_option(self) -> None:
        params = ParamSet()
        rng = make_rng(1)
        fwd = add_rnn_params(params, "fwd", 2, 3, rng)
        bwd = add_rnn_params(params, "bwd", 2, 3, rng)
        out, _ = bidirectional_run(rng.normal(size=(4, 2)), 4, fwd, bwd, cell="rnn")
        assert out.shape == (4, 6)

    def test_empty_sequence(self) -> None:
        fwd, bwd = self._layers()
        with pytest.raises(EmptySequenceError):
            bidirectional_run(np.zeros((3, 2)), 0, fwd, bwd)


class TestAttention:
    def _identity_layer(self):
        params = ParamSet()
        layer = add_attention_params(params, 2, 2, make_rng(0))
        params["attn.W_w"][...] = np.eye(2)
        params["attn.b_w"][...] = 0.0
        params["attn.u_w"][...] = [1.0, 0.0]
        return params, layer

    def test_worked_example(self) -> None:
        _, layer = self._identity_layer()
        H = np.array([[1.0, 0.0], [0.0, 1.0]])
        s, alpha, _ = attention_pool(H, 2, layer)
        np.testing.assert_allclose(alpha, [0.68162, 0.31838], atol=1e-4)
        np.testing.assert_allclose(s, [0.68162, 0.31838], atol=1e-4)

    def test_worked_example_backward_matches_differences(self) -> None:
        params, layer = self._identity_layer()
        H = np.array([[1.0, 0.0], [0.0, 1.0]])
        r = np.array([0.7, -1.3])
        W = params["attn.W_w"]

        params.zero_grad()
        _, _, cache = attention_pool(H, 2, layer)
        analytic = cache.backward(r).params["attn.W_w"]

        def f(flat: np.ndarray) -> float:
            saved = W.copy()
            W[...] = flat.reshape(W.shape)
            try:
                return float(attention_pool(H, 2, layer)[0] @ r)
            finally:
                W[...] = saved

        report = grad_check(f, W.copy(), analytic, tol=1e-6)
        assert report.passed, report.max_rel_err

    def test_single_position(self) -> None:
        _, layer = self._identity_layer()
        H = np.array([[0.3, -0.4], [9.0, 9.0]])
        s, alpha, _ = attention_pool(H, 1, layer)
        np.testing.assert_array_equal(alpha, [1.0, 0.0])
        np.testing.assert_allclose(s, H[0])

    def test_identical_rows_give_uniform_weights(self) -> None:
        params = ParamSet()
        layer = add_attention_params(params, 3, 4, make_rng(2))
        H = np.tile([0.2, -0.5, 0.9], (5, 1))
        _, alpha, _ = attention_pool(H, 4, layer)
        np.testing.assert_allclose(alpha[:4], np.full(4, 0.25))
        assert alpha[4] == 0.0

    def test_random_invariants(self) -> None:
        rng = make_rng(11)
        for _ in range(1000):
            rows = int(rng.integers(1, 8))
            length = int(rng.integers(1, rows + 1))
            dim = int(rng.integers(1, 5))
            layer = add_attention_params(ParamSet(), dim, int(rng.integers(1, 5)), rng)
            H = rng.normal(size=(rows, dim))
            s, alpha, _ = attention_pool(H, length, layer)
            assert np.all(alpha[:length] > 0.0)
            assert abs(alpha.sum() - 1.0) < 1e-12
            assert np.all(alpha[length:] == 0.0)
            valid = H[:length]
            assert np.all(s >= valid.min(axis=0) - 1e-12)
            assert np.all(s <= valid.max(axis=0) + 1e-12)

    @pytest.mark.parametrize("shift", [-50.0, -1.0, 3.0, 200.0])
    def test_constant_score_shift_leaves_weights_unchanged(self, shift: float) -> None:
        rng = make_rng(5)
        base = add_attention_params(ParamSet(), 3, 4, rng)
        shifted = add_attention_params(ParamSet(), 3, 5, rng)
        # the extra unit has a constant activation, so every score moves by `shift`
        shifted["W_w"][...] = np.hstack([base["W_w"], np.zeros((3, 1))])
        shifted["b_w"][...] = np.append(base["b_w"], 0.5)
        shifted["u_w"][...] = np.append(base["u_w"], shift / math.tanh(0.5))
        H = rng.normal(size=(6, 3))
        _, alpha, _ = attention_pool(H, 5, base)
        _, alpha_shifted, _ = attention_pool(H, 5, shifted)
        np.testing.assert_allclose(alpha_shifted, alpha, rtol=0, atol=1e-12)

    def test_all_pad(self) -> None:
        _, layer = self._identity_layer()
        with pytest.raises(EmptySequenceError):
            attention_pool(np.zeros((3, 2)), 0, layer)


class TestConv:
    def test_zero_filters(self) -> None:
        params = ParamSet()
        layer = add_conv_params(params, 3, 4, 2, make_rng(0))
        _zero(params)
        out, _ = conv1d_maxpool(make_rng(1).normal(size=(6, 2)), layer)
        np.testing.assert_array_equal(out, np.zeros(4))

    def test_selector_filter(self) -> None:
        params = ParamSet()
        layer = add_conv_params(params, 1, 1, 3, make_rng(0))
        _zero(params)
        params["conv1.filters"][0, 0, 2] = 1.0
        seq = make_rng(4).normal(size=(7, 3))
        out, _ = conv1d_maxpool(seq, layer)
        assert out[0] == pytest.approx(max(0.0, seq[:, 2].max()))

    def test_ties_pick_earliest_position(self) -> None:
        params = ParamSet()
        layer = add_conv_params(params, 1, 1, 1, make_rng(0))
        _zero(params)
        params["conv1.filters"][...] = 1.0
        _, cache = conv1d_maxpool(np.array([[1.0], [3.0], [3.0]]), layer)
        assert cache.argmax.tolist() == [1]

    def test_sequence_shorter_than_window(self) -> None:
        layer = add_conv_params(ParamSet(), 4, 2, 3, make_rng(0))
        with pytest.raises(SequenceTooShortError):
            conv1d_maxpool(np.zeros((3, 3)), layer)


class TestDenseSoftmax:
    def test_zero_params_uniform(self) -> None:
        params = ParamSet()
        layer = add_dense_params(params, 5, 4, make_rng(0))
        _zero(params)
        y, _ = dense_softmax(np.ones(5), layer)
        np.testing.assert_allclose(y, [0.25] * 4)

    def test_bias_gap_of_ten(self) -> None:
        params = ParamSet()
        layer = add_dense_params(params, 3, 2, make_rng(0))
        _zero(params)
        params["head.b_v"][...] = [10.0, 0.0]
        y, _ = dense_softmax(np.ones(3), layer)
        np.testing.assert_allclose(y, [expit(10.0), expit(-10.0)], rtol=1e-12)
        assert y[1] == pytest.approx(4.54e-5, abs=1e-7)

    def test_combined_backward_is_y_minus_t(self) -> None:
        params = ParamSet()
        layer = add_dense_params(params, 3, 3, make_rng(0))
        v = np.array([0.5, -1.0, 2.0])
        t = one_hot(np.array([2]), 3)[0]
        y, cache = dense_softmax(v, layer)
        grads = cache.backward_logits(ce_grad_logits(y, t, 2))
        np.testing.assert_allclose(grads.params["head.b_v"], (y - t) / 2)
        np.testing.assert_allclose(grads.params["head.W_v"], np.outer((y - t) / 2, v))

    def test_probability_and_logit_paths_agree(self) -> None:
        params = ParamSet()
        layer = add_dense_params(params, 4, 3, make_rng(2))
        v = make_rng(3).normal(size=4)
        t = one_hot(np.array([0]), 3)[0]
        y1, c1 = dense_softmax(v, layer)
        via_logits = c1.backward_logits(ce_grad_logits(y1, t, 1)).grad_in
        y2, c2 = dense_softmax(v, layer)
        via_probs = c2.backward(-t / y2).grad_in
        np.testing.assert_allclose(via_logits, via_probs, atol=1e-12)

    def test_feature_size_mismatch(self) -> None:
        layer = add_dense_params(ParamSet(), 4, 3, make_rng(0))
        with pytest.raises(DimensionError):
            dense_softmax(np.ones(5), layer)


class TestDropout:
    def test_rate_zero_is_identity(self) -> None:
        x = make_rng(0).normal(size=(3, 4))
        out, cache = dropout(x, 0.0, "train", make_rng(1))
        np.testing.assert_array_equal(out, x)
        np.testing.assert_array_equal(cache.mask, np.ones_like(x))

    def test_eval_is_identity(self) -> None:
        x = make_rng(0).normal(size=(3, 4))
        out, _ = dropout(x, 0.9, "eval")
        assert out is x

    def test_expectation_preserved(self) -> None:
        x = np.tile([1.0, -2.0, 3.0], (100_000, 1))
        out, _ = dropout(x, 0.5, "train", make_rng(7))
        np.testing.assert_allclose(out.mean(axis=0), [1.0, -2.0, 3.0], rtol=0.01)

    def test_keep_frequency(self) -> None:
        _, cache = dropout(np.ones(100_000), 0.3, "train", make_rng(8))
        assert np.mean(cache.mask > 0) == pytest.approx(0.7, abs=0.01)

    def test_backward_applies_mask(self) -> None:
        x = make_rng(0).normal(size=(5,))
        _, cache = dropout(x, 0.5, "train", make_rng(2))
        g = np.arange(5.0)
        np.testing.assert_array_equal(cache.backward(g).grad_in, g * cache.mask)

    def test_rate_bounds(self) -> None:
        with pytest.raises(ParameterError):
            dropout(np.ones(3), 1.0, "train", make_rng(0))
        with pytest.raises(ParameterError):
            dropout(np.ones(3), 0.5, "train", None)


class TestLoss:
    def test_perfect_prediction(self) -> None:
        t = one_hot(np.array([1, 0]), 3)
        assert loss_ce_l2(t, t) == pytest.approx(0.0)

    def test_uniform_prediction(self) -> None:
        y = np.full((1, 4), 0.25)
        t = one_hot(np.array([3]), 4)
        assert loss_ce_l2(y, t) == pytest.approx(math.log(4.0))
        assert loss_ce_l2(y, t) == pytest.approx(1.38629, abs=1e-5)

    def test_l2_term(self) -> None:
        theta = ParamSet()
        theta.add("w", np.array([1.0, -1.0]))
        t = one_hot(np.array([0]), 2)
        assert loss_ce_l2(t, t, theta, lam=0.1) == pytest.approx(0.2)

    def test_mse(self) -> None:
        y = np.array([[0.5, 0.5]])
        t = one_hot(np.array([0]), 2)
        assert loss_mse_l2(y, t) == pytest.approx(0.5)

    def test_explicit_batch_size_divides(self) -> None:
        y = np.full((1, 4), 0.25)
        t = one_hot(np.array([0]), 4)
        assert loss_ce_l2(y, t, m=2) == pytest.approx(math.log(4.0) / 2)

    def test_target_must_be_one_hot(self) -> None:
        with pytest.raises(LabelError, match="row 0"):
            loss_ce_l2(np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]]))

    def test_shape_mismatch(self) -> None:
        with pytest.raises(DimensionError):
            loss_ce_l2(np.full((1, 3), 1 / 3), one_hot(np.array([0]), 2))


class TestCaches:
    def test_second_backward_raises(self) -> None:
        _, cache = dropout(np.ones(3), 0.5, "train", make_rng(0))
        cache.backward(np.ones(3))
        assert cache.consumed
        with pytest.raises(StateError):
            cache.backward(np.ones(3))

    def test_logit_entry_also_consumes(self) -> None:
        layer = add_dense_params(ParamSet(), 2, 2, make_rng(0))
        y, cache = dense_softmax(np.ones(2), layer)
        cache.backward_logits(y)
        with pytest.raises(StateError):
            cache.backward(y)


class TestLayerGradients:
    @pytest.mark.parametrize("name", LAYER_CHECKS)
    @pytest.mark.parametrize("seed", range(5))
    def test_layer_matches_central_differences(self, name: str, seed: int) -> None:
        results = check_layer(name, seed)
        assert results
        failed = [r for r in results if not r.passed]
        assert not failed, failed
