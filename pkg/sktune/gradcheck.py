"""
Verification of reverse-mode gradients against central finite differences.
"""

# Standard library
from typing import Callable, Dict
import logging

# 3rd-party packages
import numpy as np

# Self
from . import tensor as T
from .tensor import Tensor, backward, no_grad


__all__ = [
    "grad_check",
    "finite_difference",
    "primitive_checks",
    "method_check",
    "method_checks",
    "EPS_RANGE",
]


logger = logging.getLogger(__name__)

EPS_RANGE = (1e-5, 1e-2)


def finite_difference(f: Callable[[Tensor], Tensor], x: np.ndarray, eps: float) -> np.ndarray:
    """
    Gradient of a scalar function by central differences,
    (f(x + eps·e_i) - f(x - eps·e_i)) / (2·eps) for every coordinate i.

    Parameters
    ----------
    f : Callable[[Tensor], Tensor]
        Function mapping a tensor of the shape of `x` to a scalar tensor.
    x : numpy.ndarray
        Point at which the gradient is approximated.
    eps : float
        Step size.

    Returns
    -------
    numpy.ndarray
        Approximate gradient, with the same shape as `x`.
    """
    x0 = np.array(x, dtype=np.float64)
    flat = x0.ravel()
    grad = np.zeros(flat.size)
    with no_grad():
        for i in range(flat.size):
            shifted = flat.copy()
            shifted[i] = flat[i] + eps
            f_plus = f(Tensor(shifted.reshape(x0.shape))).item()
            shifted[i] = flat[i] - eps
            f_minus = f(Tensor(shifted.reshape(x0.shape))).item()
            grad[i] = (f_plus - f_minus) / (2 * eps)
    return grad.reshape(x0.shape)


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-3) -> float:
    """
    Compare the reverse-mode gradient of a scalar function with central finite differences.

    Parameters
    ----------
    f : Callable[[Tensor], Tensor]
        Deterministic function mapping a tensor of the shape of `x` to a scalar tensor.
    x : Tensor
        Point at which both gradients are evaluated; it is not modified.
    eps : float
        Finite-difference step size, expected in [1e-5, 1e-2].

    Returns
    -------
    max_rel_error : float
        Maximum over all coordinates of |g_autodiff - g_fd| / max(1, |g_fd|).
    """
    if not EPS_RANGE[0] <= eps <= EPS_RANGE[1]:
        logger.warning(
            f"Finite-difference step {eps} lies outside the recommended range {EPS_RANGE}."
        )
    leaf = Tensor(x.data, requires_grad=True)
    backward(f(leaf))
    g_auto = np.zeros(leaf.shape) if leaf.grad is None else leaf.grad
    g_fd = finite_difference(f, x.data, eps)
    if g_fd.size == 0:
        return 0.0
    return float(np.max(np.abs(g_auto - g_fd) / np.maximum(1, np.abs(g_fd))))


def _weighted(op: Callable[[Tensor], Tensor], weights: np.ndarray) -> Callable[[Tensor], Tensor]:
    # Random weights make every output entry contribute differently to the scalar
    w = Tensor(weights)
    return lambda x: T.sum(T.mul(op(x), w))


def primitive_checks(eps: float = 1e-3, seed: int = 0) -> Dict[str, float]:
    """
    Maximum relative gradient error of every differentiable primitive, each evaluated on a
    seeded random input through a randomly weighted sum of its output.

    Operations with several differentiable inputs are checked once per input; the keys of the
    extra checks name the input, e.g. 'matmul.b' or 'layer_norm.gamma'.
    """
    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=(3, 4)))
    other = Tensor(rng.normal(size=(3, 4)))
    row = Tensor(rng.normal(size=4))
    matrix = Tensor(rng.normal(size=(4, 2)))
    gamma, beta = Tensor(rng.normal(1, 0.1, size=4)), Tensor(rng.normal(size=4))
    labels = np.array([0, 3, 1])
    # name: (operation of the checked input, point of evaluation, output shape)
    cases = {
        "matmul": (lambda t: T.matmul(t, matrix), x, (3, 2)),
        "matmul.b": (lambda t: T.matmul(x, t), matrix, (3, 2)),
        "add": (lambda t: T.add(t, row), x, (3, 4)),
        "add.b": (lambda t: T.add(x, t), row, (3, 4)),
        "sub": (lambda t: T.sub(other, t), x, (3, 4)),
        "sub.a": (lambda t: T.sub(t, row), x, (3, 4)),
        "mul": (lambda t: T.mul(t, t), x, (3, 4)),
        "mul.b": (lambda t: T.mul(x, t), row, (3, 4)),
        "scale": (lambda t: T.scale(t, -1.5), x, (3, 4)),
        "reshape": (lambda t: T.reshape(t, (2, 6)), x, (2, 6)),
        "transpose": (lambda t: T.transpose(t, (1, 0)), x, (4, 3)),
        "take": (lambda t: T.take(t, [2, 0, 2]), x, (3, 4)),
        "expand": (lambda t: T.expand(t, 2), x, (2, 3, 4)),
        "concat": (lambda t: T.concat(t, other, axis=1), x, (3, 8)),
        "concat.b": (lambda t: T.concat(other, t, axis=0), x, (6, 4)),
        "sum": (lambda t: T.sum(t, axis=0), x, (4,)),
        "mean": (lambda t: T.mean(t, axis=1), x, (3,)),
        "softmax": (lambda t: T.softmax(t, axis=-1), x, (3, 4)),
        "layer_norm": (lambda t: T.layer_norm(t, gamma, beta, 1e-5), x, (3, 4)),
        "layer_norm.gamma": (lambda t: T.layer_norm(x, t, beta, 1e-5), gamma, (3, 4)),
        "layer_norm.beta": (lambda t: T.layer_norm(x, gamma, t, 1e-5), beta, (3, 4)),
        "gelu": (T.gelu, x, (3, 4)),
    }
    errors = {
        name: grad_check(_weighted(op, rng.normal(size=shape)), point, eps)
        for name, (op, point, shape) in cases.items()
    }
    errors["cross_entropy"] = grad_check(lambda t: T.cross_entropy(t, labels), x, eps)
    return errors


def method_check(method, name: str, batch, eps: float = 1e-3) -> float:
    """
    Maximum relative error of the gradient of a method's loss on a batch, with respect to its
    trainable tensor `name`.
    """
    def loss(t: Tensor) -> Tensor:
        with method.substitute(name, t):
            return method.loss(batch)

    error = grad_check(loss, method.trainable[name], eps)
    T.zero_grad(list(method.trainable.values()))
    return error


def method_checks(method, batch, eps: float = 1e-3) -> Dict[str, float]:
    """`method_check` for every trainable tensor of a method, by qualified name."""
    return {name: method_check(method, name, batch, eps) for name in method.trainable}
