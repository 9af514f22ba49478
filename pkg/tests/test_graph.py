"""Tests for the weighted-graph aggregation round."""

from __future__ import annotations

import numpy as np
import pytest

from src.newsclf.errors import DimensionError, GraphInputError, StateError
from src.newsclf.graph import WeightedGraph, gcn_aggregate, gcn_backward
from src.newsclf.tensor import grad_check, make_rng


def _random_graph(seed: int, nodes: int = 4, width: int = 3):
    rng = make_rng(seed)
    A = rng.uniform(0.1, 1.0, size=(nodes, nodes)) * (rng.random((nodes, nodes)) < 0.7)
    H = rng.normal(size=(nodes, width))
    W = rng.normal(size=(width, width))
    b = rng.normal(size=width)
    return A, H, W, b


class TestWeightedGraph:
    def test_negative_entry_rejected(self) -> None:
        A = np.array([[0.0, -0.5], [1.0, 0.0]])
        with pytest.raises(GraphInputError, match=r"A\[0\]\[1\]"):
            WeightedGraph(A, np.ones((2, 2)))

    def test_non_square_rejected(self) -> None:
        with pytest.raises(GraphInputError):
            WeightedGraph(np.ones((2, 3)), np.ones((2, 2)))

    def test_feature_rows_must_match(self) -> None:
        with pytest.raises(GraphInputError):
            WeightedGraph(np.ones((3, 3)), np.ones((2, 2)))

    def test_neighbours_are_positive_entries(self) -> None:
        g = WeightedGraph(np.array([[0.0, 2.0, 0.5], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), np.ones((3, 1)))
        assert g.neighbours(0) == [1, 2]
        assert g.neighbours(1) == []
        assert g.num_nodes == 3


class TestAggregate:
    def test_identity_pass_through(self) -> None:
        H = np.abs(make_rng(0).normal(size=(4, 3)))
        out, _ = gcn_aggregate(WeightedGraph(np.eye(4), H), np.eye(3), np.zeros(3))
        np.testing.assert_allclose(out, H)

    def test_empty_neighbourhoods(self) -> None:
        b = np.array([0.5, -1.0, 2.0])
        out, _ = gcn_aggregate(WeightedGraph(np.zeros((3, 3)), np.ones((3, 2))), np.ones((2, 3)), b)
        np.testing.assert_array_equal(out, np.tile([0.5, 0.0, 2.0], (3, 1)))

    def test_swap_example(self) -> None:
        g = WeightedGraph(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[1.0, -2.0], [3.0, 4.0]]))
        out, _ = gcn_aggregate(g, np.eye(2), np.zeros(2))
        np.testing.assert_array_equal(out, [[3.0, 4.0], [1.0, 0.0]])

    def test_output_nonnegative(self) -> None:
        A, H, W, b = _random_graph(3)
        out, _ = gcn_aggregate(WeightedGraph(A, H), W, b)
        assert np.all(out >= 0.0)

    def test_linear_before_activation(self) -> None:
        A, H, W, b = _random_graph(4)
        zero_b = np.zeros_like(b)
        once, _ = gcn_aggregate(WeightedGraph(A, H), W, zero_b, activation="identity")
        twice, _ = gcn_aggregate(WeightedGraph(2.0 * A, H), W, zero_b, activation="identity")
        np.testing.assert_allclose(twice, 2.0 * once)

    def test_permutation_equivariance(self) -> None:
        A, H, W, b = _random_graph(5, nodes=5)
        perm = make_rng(9).permutation(5)
        out, _ = gcn_aggregate(WeightedGraph(A, H), W, b)
        permuted, _ = gcn_aggregate(WeightedGraph(A[np.ix_(perm, perm)], H[perm]), W, b)
        np.testing.assert_allclose(permuted, out[perm])

    def test_weight_shape_mismatch(self) -> None:
        with pytest.raises(DimensionError):
            gcn_aggregate(WeightedGraph(np.eye(2), np.ones((2, 3))), np.ones((2, 2)), np.zeros(2))


class TestBackward:
    @pytest.mark.parametrize("seed", range(4))
    def test_central_differences(self, seed: int) -> None:
        A, H, W, b = _random_graph(seed)
        R = make_rng(100 + seed).normal(size=(4, 3))

        def objective(A_: np.ndarray, H_: np.ndarray, W_: np.ndarray, b_: np.ndarray) -> float:
            return float(np.sum(gcn_aggregate(WeightedGraph(A_, H_), W_, b_)[0] * R))

        _, cache = gcn_aggregate(WeightedGraph(A, H), W, b)
        pre = cache.pre
        if np.min(np.abs(pre)) < 1e-3:
            pytest.skip("pre-activation too close to the relu kink")
        grads = gcn_backward(cache, R)

        checks = {
            "W": (W, grads.grad_W, lambda t: objective(A, H, t.reshape(W.shape), b)),
            "b": (b, grads.grad_b, lambda t: objective(A, H, W, t)),
            "H": (H, grads.grad_H, lambda t: objective(A, t.reshape(H.shape), W, b)),
        }
        for name, (theta, analytic, f) in checks.items():
            report = grad_check(f, theta, analytic)
            assert report.passed, (name, report.max_rel_err)

        # adjacency: only existing edges are differentiable without changing the neighbourhood
        edges = A > 0

        def f_A(t: np.ndarray) -> float:
            full = A.copy()
            full[edges] = t
            return objective(full, H, W, b)

        report = grad_check(f_A, A[edges], grads.grad_A[edges])
        assert report.passed, report.max_rel_err

    def test_structural_zeros_carry_no_gradient(self) -> None:
        A, H, W, b = _random_graph(1)
        A[0, 1] = 0.0
        _, cache = gcn_aggregate(WeightedGraph(A, H), W, b)
        grads = gcn_backward(cache, np.ones((4, 3)))
        assert np.all(grads.grad_A[A == 0.0] == 0.0)

    def test_zero_upstream_gradient(self) -> None:
        A, H, W, b = _random_graph(2)
        _, cache = gcn_aggregate(WeightedGraph(A, H), W, b)
        grads = gcn_backward(cache, np.zeros((4, 3)))
        for g in grads:
            assert not np.any(g)

    def test_cache_reuse(self) -> None:
        A, H, W, b = _random_graph(0)
        _, cache = gcn_aggregate(WeightedGraph(A, H), W, b)
        gcn_backward(cache, np.ones((4, 3)))
        with pytest.raises(StateError):
            gcn_backward(cache, np.ones((4, 3)))
