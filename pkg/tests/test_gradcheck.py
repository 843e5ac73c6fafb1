"""
Test functions for the finite-difference gradient verification in `sktune.gradcheck`.
"""

# Standard library
import logging

# 3rd-party packages
import numpy as np

# Self
from sktune import gradcheck
from sktune import tensor as T
from sktune.tensor import Tensor


# Set up random number generator with seed to make sure testing results are consistent
random_gen = np.random.RandomState(1111)


def test_primitive_checks():
    """
    Test function for `sktune.gradcheck.primitive_checks`: every differentiable input of every
    primitive is checked.
    """
    errors = gradcheck.primitive_checks(eps=1e-3, seed=3)
    assert set(errors) == {
        "matmul", "matmul.b", "add", "add.b", "sub", "sub.a", "mul", "mul.b", "scale",
        "reshape", "transpose", "take", "expand", "concat", "concat.b", "sum", "mean", "softmax",
        "layer_norm", "layer_norm.gamma", "layer_norm.beta", "gelu", "cross_entropy",
    }
    for op, error in errors.items():
        assert error < 1e-4, op
    return


def test_finite_difference():
    """
    Test function for `sktune.gradcheck.finite_difference` on the sum of squares.
    """
    x = random_gen.normal(size=(3, 2))
    grad = gradcheck.finite_difference(lambda t: T.sum(T.mul(t, t)), x, 1e-4)
    assert np.allclose(grad, 2 * x, rtol=0, atol=1e-8)
    grad = gradcheck.finite_difference(T.sum, x, 1e-3)
    assert np.allclose(grad, 1, rtol=0, atol=1e-8)
    return


def test_grad_check_detects_wrong_gradient():
    """
    Test function for `sktune.gradcheck.grad_check` with a deliberately wrong backward function.
    """
    def wrong_square(t):
        return T._record("square", t.data ** 2, (t,), lambda g: (g * t.data,))

    x = Tensor(random_gen.normal(size=4) + 3)
    assert gradcheck.grad_check(lambda t: T.sum(wrong_square(t)), x) > 0.4
    return


def test_eps_warning(caplog):
    """
    Test function for the configuration warning of `sktune.gradcheck.grad_check`.
    """
    x = Tensor(random_gen.normal(size=3))
    with caplog.at_level(logging.WARNING, logger="sktune.gradcheck"):
        gradcheck.grad_check(T.sum, x, eps=1e-8)
    assert any("outside the recommended range" in r.getMessage() for r in caplog.records)
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="sktune.gradcheck"):
        gradcheck.grad_check(T.sum, x, eps=1e-3)
    assert not caplog.records
    return
