"""
Test functions for the differentiable operations in `sktune.tensor`, compared against the
primitive implementations in `sktune.reference_ops`.
"""

# Standard library
import threading

# 3rd-party packages
import numpy as np
import pytest

# Self
from sktune import tensor as T
from sktune import reference_ops as ref
from sktune.tensor import Tensor
from sktune.exceptions import (
    ShapeMismatchError,
    LabelOutOfRangeError,
    NoTapeError,
    EmptyInputError,
    IndexOutOfRangeError,
)


# Set up random number generator with seed to make sure testing results are consistent
random_gen = np.random.RandomState(1111)


def test_matmul():
    """
    Test function for `sktune.tensor.matmul`.
    """
    for _ in range(10):
        n, k, m = random_gen.randint(1, 6, size=3)
        a = random_gen.normal(size=(n, k))
        b = random_gen.normal(size=(k, m))
        c = T.matmul(Tensor(a), Tensor(b)).data
        c_ref = np.array(ref.matmul(a.tolist(), b.tolist()))
        assert np.allclose(c, c_ref, rtol=0, atol=1e-12)
    with pytest.raises(ShapeMismatchError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    return


def test_matmul_batched():
    """
    Test function for `sktune.tensor.matmul` with leading batch dimensions.
    """
    a = random_gen.normal(size=(2, 3, 4, 5))
    b = random_gen.normal(size=(2, 3, 5, 2))
    c = T.matmul(Tensor(a), Tensor(b)).data
    assert c.shape == (2, 3, 4, 2)
    assert np.allclose(c[1, 2], a[1, 2] @ b[1, 2])
    return


def test_softmax():
    """
    Test function for `sktune.tensor.softmax`.
    """
    for _ in range(10):
        x = random_gen.normal(scale=5, size=(3, 7))
        y = T.softmax(Tensor(x), axis=-1).data
        for row, row_out in zip(x, y):
            assert np.allclose(row_out, ref.softmax(row.tolist()), rtol=0, atol=1e-12)
        assert np.allclose(y.sum(axis=-1), 1, rtol=0, atol=1e-12)
    # Masked entries receive exactly zero probability
    x = np.array([[0.0, -np.inf, 1.0]])
    y = T.softmax(Tensor(x)).data
    assert y[0, 1] == 0
    return


def test_layer_norm():
    """
    Test function for `sktune.tensor.layer_norm`.
    """
    for _ in range(10):
        x = random_gen.normal(scale=3, size=(4, 6))
        gamma = random_gen.normal(size=6)
        beta = random_gen.normal(size=6)
        y = T.layer_norm(Tensor(x), Tensor(gamma), Tensor(beta), 1e-5).data
        for row, row_out in zip(x, y):
            row_ref = ref.layer_norm(row.tolist(), gamma.tolist(), beta.tolist(), 1e-5)
            assert np.allclose(row_out, row_ref, rtol=0, atol=1e-10)
    return


def test_layer_norm_grad():
    """
    Test function for the gradients of `sktune.tensor.layer_norm` with respect to the input, the
    gain and the bias, against central finite differences.
    """
    x = random_gen.normal(scale=2, size=(3, 5))
    gamma = random_gen.normal(size=5)
    beta = random_gen.normal(size=5)
    weights = random_gen.normal(size=(3, 5))

    def loss_value(x_, gamma_, beta_):
        y = T.layer_norm(Tensor(x_), Tensor(gamma_), Tensor(beta_), 1e-5).data
        return float(np.sum(y * weights))

    tensors = [Tensor(x, requires_grad=True), Tensor(gamma, requires_grad=True),
               Tensor(beta, requires_grad=True)]
    out = T.layer_norm(*tensors, 1e-5)
    T.backward(T.sum(T.mul(out, Tensor(weights))))
    arrays = [x, gamma, beta]
    for i, tensor in enumerate(tensors):
        numeric = np.zeros_like(arrays[i])
        for idx in np.ndindex(arrays[i].shape):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[i][idx] += 1e-6
            minus[i][idx] -= 1e-6
            numeric[idx] = (loss_value(*plus) - loss_value(*minus)) / 2e-6
        assert np.allclose(tensor.grad, numeric, rtol=1e-5, atol=1e-7)
    return


def test_cross_entropy():
    """
    Test function for `sktune.tensor.cross_entropy`.
    """
    for _ in range(10):
        logits = random_gen.normal(scale=4, size=(5, 3))
        labels = random_gen.randint(0, 3, size=5)
        loss = T.cross_entropy(Tensor(logits), labels).item()
        assert np.isclose(loss, ref.cross_entropy(logits.tolist(), labels.tolist()), atol=1e-12)
    with pytest.raises(LabelOutOfRangeError):
        T.cross_entropy(Tensor(np.zeros((2, 3))), [0, 3])
    with pytest.raises(ShapeMismatchError):
        T.cross_entropy(Tensor(np.zeros((2, 3))), [0, 1, 2])
    with pytest.raises(EmptyInputError):
        T.cross_entropy(Tensor(np.zeros((0, 3))), np.zeros(0, dtype=int))
    return


def test_backward_simple():
    """
    Test function for `sktune.tensor.backward` on a graph with a reused node.
    """
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    y = T.mul(x, x)
    loss = T.sum(T.add(y, y))
    T.backward(loss)
    assert np.allclose(x.grad, 4 * x.data)
    # Gradients accumulate over calls, and are reset by `zero_grad`
    T.backward(T.sum(x))
    assert np.allclose(x.grad, 4 * x.data + 1)
    T.zero_grad([x])
    assert x.grad is None
    return


def test_backward_broadcast():
    """
    Test function for the gradient of suffix broadcasting in `sktune.tensor.add`.
    """
    x = Tensor(random_gen.normal(size=(2, 3, 4)), requires_grad=True)
    b = Tensor(random_gen.normal(size=4), requires_grad=True)
    T.backward(T.sum(T.add(x, b)))
    assert b.grad.shape == (4,)
    assert np.allclose(b.grad, 6)
    assert np.allclose(x.grad, 1)
    with pytest.raises(ShapeMismatchError):
        T.add(x, Tensor(np.ones(3)))
    return


def test_take():
    """
    Test function for `sktune.tensor.take`, including repeated indices.
    """
    x = Tensor(random_gen.normal(size=(4, 2)), requires_grad=True)
    y = T.take(x, [1, 3, 1])
    assert np.array_equal(y.data, x.data[[1, 3, 1]])
    T.backward(T.sum(y))
    assert np.array_equal(x.grad, np.array([[0, 0], [2, 2], [0, 0], [1, 1]], dtype=float))
    assert T.take(x, 2).shape == (2,)
    assert T.select(x, 2).shape == (2,)
    with pytest.raises(IndexOutOfRangeError):
        T.take(x, [4])
    with pytest.raises(IndexError):
        T.take(x, [-5])
    return


def test_concat_expand():
    """
    Test function for `sktune.tensor.concat` and `sktune.tensor.expand`.
    """
    a = Tensor(random_gen.normal(size=(2, 3)), requires_grad=True)
    b = Tensor(random_gen.normal(size=(4, 3)), requires_grad=True)
    c = T.concat(T.expand(a, 5), T.expand(b, 5), axis=1)
    assert c.shape == (5, 6, 3)
    T.backward(T.sum(c))
    assert np.allclose(a.grad, 5)
    assert np.allclose(b.grad, 5)
    with pytest.raises(ShapeMismatchError):
        T.concat(a, Tensor(np.ones((2, 4))), axis=0)
    return


def test_no_grad():
    """
    Test function for `sktune.tensor.no_grad`.
    """
    x = Tensor(np.ones(3), requires_grad=True)
    with T.no_grad():
        y = T.sum(T.mul(x, x))
        assert not T.is_grad_enabled()
    assert T.is_grad_enabled()
    assert y.tape_node is None
    with pytest.raises(NoTapeError):
        T.backward(y)
    # The flag is local to each thread
    flags = []
    with T.no_grad():
        thread = threading.Thread(target=lambda: flags.append(T.is_grad_enabled()))
        thread.start()
        thread.join()
    assert flags == [True]
    return


def test_tape_errors():
    """
    Test function for the errors of `sktune.tensor.Tape`.
    """
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeMismatchError):
        T.backward(T.mul(x, x))
    with pytest.raises(NoTapeError):
        T.backward(Tensor(1.0))
    return


def test_tensor_data_setter():
    """
    Test function for the `data` setter of `sktune.tensor.Tensor`.
    """
    x = Tensor(np.zeros((2, 2)))
    source = np.ones((2, 2))
    x.data = source
    source[0, 0] = 5
    assert x.data[0, 0] == 1
    with pytest.raises(ShapeMismatchError):
        x.data = np.ones(3)
    return


def test_backward_intermediate_grad():
    """
    Test that `sktune.tensor.backward` writes gradients only into leaf tensors; intermediate
    results keep `grad=None`.
    """
    x = Tensor(random_gen.normal(size=3), requires_grad=True)
    y = T.mul(x, x)
    assert y.requires_grad
    T.backward(T.sum(y))
    assert y.grad is None
    assert np.allclose(x.grad, 2 * x.data)
    return
