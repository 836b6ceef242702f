"""Tests for tensors, differentiable operations and SGD."""
from __future__ import annotations

import math

import numpy as np
import pytest

from modedg.autodiff import (
    SGD,
    Graph,
    Tensor,
    backward,
    concat,
    conv2d,
    dense,
    flatten,
    grad,
    maxpool2d,
    relu,
    sgd_step,
    softmax_cross_entropy,
    weighted_sum,
)
from modedg.autodiff.optim import SGDState
from modedg.utils.errors import GraphError, ShapeError


def numeric_grad(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function of an array."""
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        up = fn(x)
        x[idx] = orig - h
        down = fn(x)
        x[idx] = orig
        out[idx] = (up - down) / (2 * h)
    return out


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def test_dense_identity_and_zero() -> None:
    eye = np.eye(2)
    assert np.array_equal(dense(eye, eye, np.zeros(2)).data, eye)
    x = np.random.default_rng(0).normal(size=(3, 4))
    assert np.array_equal(dense(x, np.zeros((4, 2)), np.zeros(2)).data, np.zeros((3, 2)))


def test_dense_matches_dot_products() -> None:
    rng = np.random.default_rng(1)
    x, w = rng.normal(size=(2, 3)), rng.normal(size=(3, 2))
    b = rng.normal(size=2)
    out = dense(x, w, b).data
    for i in range(2):
        for j in range(2):
            assert out[i, j] == pytest.approx(sum(x[i, k] * w[k, j] for k in range(3)) + b[j])


def test_dense_shape_mismatch_rejected() -> None:
    with pytest.raises(ShapeError):
        dense(np.ones((2, 3)), np.ones((2, 2)), np.zeros(2))


def test_conv2d_identity_kernel_and_zero_input() -> None:
    x = np.random.default_rng(2).normal(size=(1, 1, 4, 4))
    assert np.allclose(conv2d(x, np.ones((1, 1, 1, 1))).data, x)
    assert np.array_equal(conv2d(np.zeros((1, 2, 5, 5)), np.ones((3, 2, 3, 3))).data, np.zeros((1, 3, 3, 3)))


def test_conv2d_matches_direct_loops() -> None:
    rng = np.random.default_rng(3)
    x = rng.normal(size=(1, 2, 5, 5))
    k = rng.normal(size=(3, 2, 3, 3))
    out = conv2d(x, k).data
    expected = np.zeros((1, 3, 3, 3))
    for n in range(1):
        for o in range(3):
            for i in range(3):
                for j in range(3):
                    for c in range(2):
                        for a in range(3):
                            for b in range(3):
                                expected[n, o, i, j] += x[n, c, i + a, j + b] * k[o, c, a, b]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_conv2d_kernel_larger_than_input_rejected() -> None:
    with pytest.raises(ShapeError):
        conv2d(np.ones((1, 1, 2, 2)), np.ones((1, 1, 3, 3)))


def test_conv2d_gradients_match_finite_differences() -> None:
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 2, 5, 5))
    k = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    xt, kt, bt = Tensor(x, requires_grad=True), Tensor(k, requires_grad=True), Tensor(b, requires_grad=True)
    weights = rng.normal(size=(2, 3, 3, 3))
    loss = (conv2d(xt, kt, bt, stride=2, pad=1) * weights).sum()
    grads = grad(loss, [xt, kt, bt])

    def f_x(v):
        return float((conv2d(v, k, b, stride=2, pad=1).data * weights).sum())

    def f_k(v):
        return float((conv2d(x, v, b, stride=2, pad=1).data * weights).sum())

    assert relative_error(grads[xt], numeric_grad(f_x, x.copy())) < 1e-6
    assert relative_error(grads[kt], numeric_grad(f_k, k.copy())) < 1e-6
    np.testing.assert_allclose(grads[bt], weights.sum(axis=(0, 2, 3)))


def test_relu_and_maxpool_values() -> None:
    assert np.array_equal(relu(np.array([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])
    pooled = maxpool2d(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
    assert pooled.data.item() == 4.0


def test_maxpool_backward_routes_to_argmax() -> None:
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 3, 4, 4))
    xt = Tensor(x, requires_grad=True)
    weights = rng.normal(size=(2, 3, 2, 2))
    g = grad((maxpool2d(xt) * weights).sum(), [xt])[xt]
    numeric = numeric_grad(lambda v: float((maxpool2d(v).data * weights).sum()), x.copy())
    assert relative_error(g, numeric) < 1e-6
    # one nonzero entry per window
    assert np.count_nonzero(g) == weights.size


def test_flatten_keeps_batch_axis() -> None:
    assert flatten(np.zeros((2, 3, 4, 4))).shape == (2, 48)


def test_cross_entropy_uniform_and_saturated() -> None:
    loss = softmax_cross_entropy(np.zeros((4, 10)), [0, 3, 5, 9])
    assert loss.item() == pytest.approx(math.log(10), abs=1e-12)
    logits = np.zeros((1, 3))
    logits[0, 1] = 1000.0
    assert softmax_cross_entropy(logits, [1]).item() < 1e-6


def test_cross_entropy_matches_direct_formula() -> None:
    logits = np.array([[0.3, -1.2, 2.0], [1.5, 0.1, -0.4]])
    labels = [2, 0]
    expected = np.mean([
        -float(np.longdouble(logits[i, labels[i]]) - np.log(np.sum(np.exp(logits[i].astype(np.longdouble)))))
        for i in range(2)
    ])
    assert softmax_cross_entropy(logits, labels).item() == pytest.approx(expected, abs=1e-12)


def test_cross_entropy_gradient_and_reductions() -> None:
    rng = np.random.default_rng(6)
    logits = rng.normal(size=(4, 3))
    labels = np.array([0, 2, 1, 2])
    lt = Tensor(logits, requires_grad=True)
    g = grad(softmax_cross_entropy(lt, labels), [lt])[lt]
    numeric = numeric_grad(lambda v: softmax_cross_entropy(v, labels).item(), logits.copy())
    assert relative_error(g, numeric) < 1e-6
    per_sample = softmax_cross_entropy(logits, labels, reduction="none").data
    assert per_sample.shape == (4,)
    assert softmax_cross_entropy(logits, labels, reduction="sum").item() == pytest.approx(per_sample.sum())


def test_cross_entropy_rejects_out_of_range_label() -> None:
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 3)), [0, 3])


def test_backward_sum_and_inner_product() -> None:
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    assert np.array_equal(grad(x.sum(), [x])[x], np.ones(3))
    assert np.allclose(grad((x * x).sum(), [x])[x], 2 * x.data)


def test_backward_accumulates_shared_subexpressions() -> None:
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * x
    loss = (y + y * x).sum()  # x^2 + x^3
    assert grad(loss, [x])[x].item() == pytest.approx(2 * 2.0 + 3 * 4.0)


def test_backward_rejects_foreign_leaf_and_non_scalar() -> None:
    x = Tensor(np.ones(3), requires_grad=True)
    other = Tensor(np.ones(3), requires_grad=True)
    loss = x.sum()
    graph = Graph.trace(loss)
    with pytest.raises(GraphError):
        backward(graph, loss, [other])
    vector = x * 2.0
    with pytest.raises(GraphError):
        backward(Graph.trace(vector), vector, [x])


def test_graph_is_topologically_ordered() -> None:
    x = Tensor(np.ones(2), requires_grad=True)
    y = x * 3.0
    z = (y + x).sum()
    order = [id(node) for node in Graph.trace(z).nodes]
    assert order.index(id(x)) < order.index(id(y)) < order.index(id(z))


def test_constant_subgraphs_are_folded() -> None:
    a = Tensor(np.ones(2))
    assert (a * 2.0 + 1.0).parents == ()


def test_weighted_sum_and_concat_gradients() -> None:
    rng = np.random.default_rng(7)
    w = rng.dirichlet(np.ones(3), size=2)
    v = rng.normal(size=(2, 3, 4))
    wt, vt = Tensor(w, requires_grad=True), Tensor(v, requires_grad=True)
    out = weighted_sum(wt, vt)
    np.testing.assert_allclose(out.data, np.einsum("nm,nmc->nc", w, v))
    g = grad((out * out).sum(), [wt])[wt]
    numeric = numeric_grad(lambda x: float((np.einsum("nm,nmc->nc", x, v) ** 2).sum()), w.copy())
    assert relative_error(g, numeric) < 1e-6

    a = Tensor(np.ones((2, 1)), requires_grad=True)
    b = Tensor(np.ones((2, 2)), requires_grad=True)
    scale = np.arange(6.0).reshape(2, 3)
    grads = grad((concat([a, b], axis=1) * scale).sum(), [a, b])
    np.testing.assert_array_equal(grads[a], scale[:, :1])
    np.testing.assert_array_equal(grads[b], scale[:, 1:])


def test_sgd_weight_decay_only_shrinks() -> None:
    w = Tensor(np.array([1.0, -2.0]))
    sgd_step({"w": w}, {"w": np.zeros(2)}, lr=0.1, weight_decay=0.5)
    np.testing.assert_allclose(w.data, np.array([1.0, -2.0]) * (1 - 0.1 * 0.5))


def test_sgd_plain_gradient_step() -> None:
    w = Tensor(np.array([1.0, 2.0]))
    sgd_step({"w": w}, {"w": np.array([0.5, -1.0])}, lr=0.2)
    np.testing.assert_allclose(w.data, [0.9, 2.2])


def test_sgd_momentum_matches_unrolled_recurrence() -> None:
    w = Tensor(np.array([1.0]))
    state = SGDState()
    g1, g2 = np.array([0.5]), np.array([0.25])
    sgd_step({"w": w}, {"w": g1}, lr=0.1, momentum=0.9, state=state)
    sgd_step({"w": w}, {"w": g2}, lr=0.1, momentum=0.9, state=state)
    v1 = g1
    v2 = 0.9 * v1 + g2
    np.testing.assert_allclose(w.data, 1.0 - 0.1 * v1 - 0.1 * v2)
    assert state.steps == 2


def test_sgd_rejects_mismatched_gradient() -> None:
    with pytest.raises(ShapeError):
        sgd_step({"w": Tensor(np.ones(2))}, {"w": np.ones(3)}, lr=0.1)


def test_sgd_optimizer_consumes_gradient_map() -> None:
    w = Tensor(np.array([3.0]), requires_grad=True)
    optimizer = SGD({"w": w}, lr=0.5)
    optimizer.step(grad((w * w).sum(), [w]))
    np.testing.assert_allclose(w.data, [0.0])


@pytest.mark.slow
@pytest.mark.parametrize("trial", range(50))
def test_three_block_network_gradients_match_finite_differences(trial) -> None:
    from modedg.models import ModelConfig, build_model

    rng = np.random.default_rng(100 + trial)
    model = build_model(ModelConfig(channels=(2, 2, 2), classes=3, image_size=8, mix_block=None, init_seed=trial))
    x = rng.random((2, 3, 8, 8))
    y = rng.integers(0, 3, size=2)

    def loss_value(_) -> float:
        return softmax_cross_entropy(model.forward(x), y).item()

    grads = grad(softmax_cross_entropy(model.forward(x), y), model.parameters())
    for param in model.parameters():
        expected = numeric_grad(loss_value, param.data)
        assert relative_error(grads[param], expected) < 1e-5
