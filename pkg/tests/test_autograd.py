import threading

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

from src.autograd import (Graph, Tensor, add, backward, bias_add, clip, concat, cross_entropy,
                          elementwise, get_default_dtype, is_grad_enabled, matmul, mul, no_grad, open_unit,
                          overlap_add, relu, reshape, scale, set_default_dtype, sigmoid, softmax, square,
                          sub, tanh, total, transpose)
from src.utils.exceptions import ContractError, NumericalError, ShapeError


def param(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def test_elementwise_and_matmul_gradients_match_finite_differences(rng, numerical_gradient):
    a, b = param(rng, 3, 4), param(rng, 4, 2)
    c = param(rng, 3, 2)

    def f():
        return total(square(tanh(add(matmul(a, b), mul(c, sigmoid(c))))))

    backward(f())
    for t in (a, b, c):
        assert_allclose(t.grad, numerical_gradient(f, t), rtol=1e-5, atol=1e-8)


def test_structural_ops_gradients(rng, numerical_gradient):
    x, y, bias = param(rng, 2, 3), param(rng, 2, 2), param(rng, 3)

    def f():
        joined = concat([x, y], axis=1)
        picked = joined[:, 1:4]
        flat = reshape(transpose(bias_add(picked, bias)), (1, 6))
        return total(mul(flat, flat))

    backward(f())
    for t in (x, y, bias):
        assert_allclose(t.grad, numerical_gradient(f, t), rtol=1e-5, atol=1e-8)


def test_reused_tensor_accumulates_gradient():
    x = Tensor([3.0], requires_grad=True)
    backward(total(mul(x, x)))
    assert_allclose(x.grad, [6.0])


def test_leaf_gradients_accumulate_across_backward_calls():
    x = Tensor([1.0, 2.0], requires_grad=True)
    backward(total(scale(x, 2.0)))
    backward(total(scale(x, 3.0)))
    assert_allclose(x.grad, [5.0, 5.0])
    x.zero_grad()
    assert_allclose(x.grad, [0.0, 0.0])


def test_deep_chain_has_no_recursion_limit():
    x = Tensor([0.5], requires_grad=True)
    y = x
    for _ in range(5000):
        y = scale(y, 1.0)
    graph = backward(total(y))
    assert isinstance(graph, Graph)
    assert_allclose(x.grad, [1.0])


def test_backward_requires_scalar_recorded_loss(rng):
    x = param(rng, 2, 2)
    with pytest.raises(ContractError):
        backward(mul(x, x))
    with pytest.raises(ContractError):
        backward(total(Tensor(np.ones((2, 2)))))


def test_shape_errors(rng):
    with pytest.raises(ShapeError):
        add(param(rng, 2, 3), param(rng, 3, 2))
    with pytest.raises(ShapeError):
        matmul(param(rng, 2, 3), param(rng, 2, 3))
    with pytest.raises(ShapeError):
        Tensor(np.zeros((0, 3)))


def test_non_finite_result_raises():
    with pytest.raises(NumericalError):
        add(Tensor([np.inf]), Tensor([1.0]))


def test_relu_subgradient_at_zero_is_zero():
    x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
    backward(total(relu(x)))
    assert_allclose(x.grad, [0.0, 0.0, 1.0])


def test_no_grad_is_thread_local():
    x = Tensor([1.0], requires_grad=True)
    seen = {}

    def worker():
        seen['enabled'] = is_grad_enabled()

    with no_grad():
        assert not mul(x, x).requires_grad
        thread = threading.Thread(target=worker)
        thread.start()
        thread.join()
    assert seen['enabled']
    assert mul(x, x).requires_grad


def test_masked_softmax_gives_exact_zeros(rng):
    scores = param(rng, 3, 4)
    mask = np.tril(np.ones((3, 4), dtype=bool))
    probs = softmax(scores, axis=1, mask=mask)
    assert np.all(probs.data[~mask] == 0.0)
    assert_allclose(probs.data.sum(axis=1), 1.0, atol=1e-12)
    assert_allclose(probs.data[0], [1.0, 0.0, 0.0, 0.0])


@pytest.mark.parametrize('scores, expected', [
    ([3.0], [1.0]),
    ([-7.5], [1.0]),
    ([0.0, 0.0, 0.0], [1 / 3, 1 / 3, 1 / 3]),
    ([2.0, 2.0, 2.0, 2.0], [0.25, 0.25, 0.25, 0.25]),
    ([1000.0, 1000.1], [1 / (1 + np.exp(0.1)), np.exp(0.1) / (1 + np.exp(0.1))]),
])
def test_softmax_edge_cases(scores, expected):
    probs = softmax(Tensor(np.array(scores)))
    assert np.all(np.isfinite(probs.data))
    assert_allclose(probs.data, expected, rtol=1e-12)
    assert probs.data.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize('scores, mask', [
    ([5.0, -1.0, 7.0], [True, False, True]),
    ([1000.0, 1000.1, -1000.0], [False, True, True]),
    ([0.0, 0.0, 0.0], [False, False, True]),
])
def test_masked_vector_entries_are_exactly_zero(scores, mask):
    mask = np.array(mask)
    probs = softmax(Tensor(np.array(scores)), mask=mask).data
    assert np.all(probs[~mask] == 0.0)
    assert np.all(probs[mask] > 0.0)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_clip_blocks_gradient_outside_the_range():
    x = Tensor(np.array([-2.0, 0.5, 3.0]), requires_grad=True)
    out = clip(x, -1.0, 1.0)
    assert_allclose(out.data, [-1.0, 0.5, 1.0])
    backward(total(out))
    assert_allclose(x.grad, [0.0, 1.0, 0.0])


def test_open_unit_keeps_saturated_sigmoid_off_the_bounds():
    probs = open_unit(sigmoid(Tensor(np.array([-1e3, 0.0, 1e3]))))
    assert np.all((probs.data > 0.0) & (probs.data < 1.0))
    assert probs.data[1] == 0.5


@pytest.mark.parametrize('name, op', [('relu', relu), ('sigmoid', sigmoid), ('tanh', tanh), ('square', square)])
def test_elementwise_dispatches_unary_ops(rng, name, op):
    x = param(rng, 3, 2)
    assert_allclose(elementwise(name, x).data, op(x).data, rtol=0, atol=0)


@pytest.mark.parametrize('name, op', [('add', add), ('sub', sub), ('mul', mul)])
def test_elementwise_dispatches_binary_ops(rng, name, op):
    a, b = param(rng, 3, 2), param(rng, 3, 2)
    a2, b2 = Tensor(a.data.copy(), requires_grad=True), Tensor(b.data.copy(), requires_grad=True)
    out = elementwise(name, a, b)
    assert_allclose(out.data, op(a2, b2).data, rtol=0, atol=0)
    backward(total(out))
    backward(total(op(a2, b2)))
    assert_allclose(a.grad, a2.grad, rtol=0, atol=0)
    assert_allclose(b.grad, b2.grad, rtol=0, atol=0)
    assert np.any(a.grad != 0)


def test_elementwise_rejects_wrong_arity_and_unknown_names(rng):
    a, b = param(rng, 2), param(rng, 2)
    with pytest.raises(ContractError):
        elementwise('tanh', a, b)
    with pytest.raises(ContractError):
        elementwise('mul', a)
    with pytest.raises(ContractError):
        elementwise('softplus', a)


def test_softmax_gradient(rng, numerical_gradient):
    x = param(rng, 2, 5)
    weights = Tensor(rng.standard_normal((2, 5)))
    mask = rng.random((2, 5)) > 0.3
    mask[:, 0] = True

    def f():
        return total(mul(softmax(x, axis=1, mask=mask), weights))

    backward(f())
    assert_allclose(x.grad, numerical_gradient(f, x), rtol=1e-5, atol=1e-8)


def test_softmax_rejects_fully_masked_rows(rng):
    mask = np.ones((2, 3), dtype=bool)
    mask[1] = False
    with pytest.raises(ContractError):
        softmax(param(rng, 2, 3), axis=1, mask=mask)


def test_cross_entropy_matches_log_softmax_oracle(rng, numerical_gradient):
    logits = param(rng, 4, 3)
    labels = np.array([0, 2, 1, 2])
    expected = -np.sum(special.log_softmax(logits.data, axis=1)[np.arange(4), labels])
    assert_allclose(cross_entropy(logits, labels).item(), expected, rtol=1e-12)

    backward(cross_entropy(logits, labels))
    assert_allclose(logits.grad, numerical_gradient(lambda: cross_entropy(logits, labels), logits),
                    rtol=1e-5, atol=1e-8)
    with pytest.raises(ContractError):
        cross_entropy(logits, np.array([0, 3, 1, 2]))


def test_overlap_add_with_hop_equal_to_frame_len_concatenates():
    frames = Tensor(np.arange(12.0).reshape(3, 4))
    assert_allclose(overlap_add(frames, 4, 10).data, np.arange(10.0))


def test_overlap_add_sums_overlaps_and_backpropagates(numerical_gradient):
    frames = Tensor(np.ones((3, 4)), requires_grad=True)
    out = overlap_add(frames, 2, 8)
    assert_allclose(out.data, [1, 1, 2, 2, 2, 2, 1, 1])

    ramp = Tensor(np.arange(7.0))

    def f():
        return total(mul(overlap_add(frames, 2, 7), ramp))

    backward(f())
    assert_allclose(frames.grad, numerical_gradient(f, frames), rtol=1e-6, atol=1e-8)
    # The trimmed last sample contributes nothing.
    assert frames.grad[2, 3] == 0.0


def test_precision_switch():
    set_default_dtype('float32')
    assert Tensor([1.0]).data.dtype == np.float32
    assert get_default_dtype() == np.float32
    set_default_dtype('float64')
    assert Tensor([1.0]).data.dtype == np.float64
    with pytest.raises(ContractError):
        set_default_dtype('float16')
