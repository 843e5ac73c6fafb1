"""
Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable operation in this module takes `Tensor` objects and returns a new `Tensor`.
When gradient recording is enabled (see `no_grad`) and at least one input requires a gradient,
the output carries a `TapeNode`, storing the inputs and a closure mapping the output's gradient to
the gradients of the inputs. Calling `backward` on a scalar output sorts all reachable nodes
topologically and accumulates gradients into the `grad` attribute of every leaf tensor (one
without a tape node) that requires one.

Broadcasting is restricted to suffix broadcasting: in binary elementwise operations, the shape of
the smaller operand must equal the trailing dimensions of the larger one.
"""

# Standard library
from __future__ import annotations
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union
import threading

# 3rd-party packages
import numpy as np
from scipy import special

# Self
from .activations import gelu as _gelu_fn
from .exceptions import (
    ShapeMismatchError,
    LabelOutOfRangeError,
    NoTapeError,
    EmptyInputError,
    IndexOutOfRangeError,
)


__all__ = [
    "Tensor",
    "TapeNode",
    "Tape",
    "no_grad",
    "is_grad_enabled",
    "backward",
    "zero_grad",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "reshape",
    "transpose",
    "take",
    "select",
    "expand",
    "concat",
    "sum",
    "mean",
    "softmax",
    "layer_norm",
    "gelu",
    "cross_entropy",
]


_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Context manager disabling gradient recording; operations inside it never create tape nodes.
    """
    previous = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


class TapeNode:
    """
    Record of a single differentiable operation.

    Parameters
    ----------
    op : str
        Name of the operation.
    inputs : Tuple[Tensor, ...]
        Input tensors of the operation.
    backward_fn : Callable[[numpy.ndarray], Sequence[Optional[numpy.ndarray]]]
        Function mapping the gradient of the output to the gradients of each input
        (None for inputs that need none).
    """

    __slots__ = ("op", "inputs", "backward_fn")

    def __init__(
        self,
        op: str,
        inputs: Tuple["Tensor", ...],
        backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
    ):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        return

    def __repr__(self):
        return f"TapeNode(op={self.op!r}, n_inputs={len(self.inputs)})"


class Tensor:
    """
    Dense n-dimensional float64 array, optionally tracking gradients.

    Parameters
    ----------
    data : array_like
        Values of the tensor; always copied and converted to float64.
    requires_grad : bool
        Whether gradients should be accumulated into this tensor.
    """

    __slots__ = ("_data", "requires_grad", "grad", "tape_node")

    def __init__(self, data, requires_grad: bool = False):
        self._data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.tape_node: Optional[TapeNode] = None
        return

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        # Wrap an array produced by an operation, without copying it again.
        tensor = cls.__new__(cls)
        tensor._data = np.asarray(data, dtype=np.float64)
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor.tape_node = None
        return tensor

    @property
    def data(self) -> np.ndarray:
        return self._data

    @data.setter
    def data(self, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._data.shape:
            raise ShapeMismatchError(
                f"Cannot assign data of shape {value.shape} to a tensor of shape {self.shape}."
            )
        self._data = value.copy()
        return

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def numpy(self) -> np.ndarray:
        """Copy of the tensor's values."""
        return self._data.copy()

    def item(self) -> float:
        if self._data.size != 1:
            raise ShapeMismatchError(f"Only single-element tensors can be converted to floats.")
        return float(self._data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self._data)

    def backward(self) -> None:
        backward(self)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self):
        grad_info = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{grad_info})"


def _record(
    op: str,
    data: np.ndarray,
    inputs: Tuple[Tensor, ...],
    backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
) -> Tensor:
    requires_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor._wrap(data, requires_grad)
    if requires_grad:
        out.tape_node = TapeNode(op, inputs, backward_fn)
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Sum a gradient over the dimensions along which an operand of shape `shape` was broadcast.
    """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _raise_for_suffix(a: Tensor, b: Tensor, op: str) -> None:
    small, large = (a, b) if a.ndim <= b.ndim else (b, a)
    if small.ndim > 0 and large.shape[large.ndim - small.ndim:] != small.shape:
        raise ShapeMismatchError(
            f"`{op}`: shape {small.shape} is not a suffix of shape {large.shape}."
        )
    return


class Tape:
    """
    Topologically ordered list of the tape nodes reachable from a scalar loss.

    Parameters
    ----------
    loss : Tensor
        Scalar tensor produced by recorded operations.
    """

    __slots__ = ("_loss", "_order")

    def __init__(self, loss: Tensor):
        if loss.tape_node is None:
            raise NoTapeError("The loss has no tape node; nothing was recorded.")
        if loss.size != 1:
            raise ShapeMismatchError(f"The loss should be a scalar, but has shape {loss.shape}.")
        self._loss = loss
        self._order = self._sort(loss)
        return

    @staticmethod
    def _sort(loss: Tensor) -> List[Tensor]:
        # Iterative post-order depth-first search; avoids recursion limits on deep graphs.
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(loss, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            for parent in tensor.tape_node.inputs:
                if parent.tape_node is not None and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    @property
    def nodes(self) -> List[TapeNode]:
        return [tensor.tape_node for tensor in self._order]

    def __len__(self):
        return len(self._order)

    def backward(self) -> None:
        """
        Propagate gradients from the loss back to every leaf tensor requiring one.
        Gradients accumulate into existing `grad` arrays.
        """
        # Gradients of intermediate results stay local to this walk
        pending: Dict[int, np.ndarray] = {id(self._loss): np.ones(self._loss.shape)}
        for tensor in reversed(self._order):
            grad_out = pending.pop(id(tensor), None)
            if grad_out is None:
                continue
            for parent, grad_in in zip(
                tensor.tape_node.inputs, tensor.tape_node.backward_fn(grad_out)
            ):
                if grad_in is None or not parent.requires_grad:
                    continue
                if parent.tape_node is None:
                    parent.grad = grad_in.copy() if parent.grad is None else parent.grad + grad_in
                else:
                    key = id(parent)
                    pending[key] = grad_in if key not in pending else pending[key] + grad_in
        return


def backward(loss: Tensor) -> None:
    """
    Compute gradients of a scalar loss with respect to every leaf tensor requiring a gradient,
    accumulating them into the leaves' `grad` attributes.

    Only leaves are written to: intermediate results keep `grad=None` even when they require a
    gradient, since their gradients are consumed while walking the tape.

    Raises
    ------
    NoTapeError
        When `loss` was not produced by recorded operations.
    """
    Tape(loss).backward()
    return


def zero_grad(params: Sequence[Tensor]) -> None:
    """Reset the gradients of the given tensors."""
    for param in params:
        param.grad = None
    return


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product over the last two dimensions, broadcasting leading (batch) dimensions.

    Raises
    ------
    ShapeMismatchError
        When the inner dimensions differ, or the batch dimensions cannot be broadcast.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatchError(
            f"`matmul` needs operands with at least 2 dimensions; got {a.shape} and {b.shape}."
        )
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError(f"`matmul`: inner dimensions of {a.shape} and {b.shape} differ.")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeMismatchError(
            f"`matmul`: batch dimensions of {a.shape} and {b.shape} cannot be broadcast."
        )
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        grad_a = _unbroadcast(np.matmul(g, np.swapaxes(b_data, -1, -2)), a_data.shape)
        grad_b = _unbroadcast(np.matmul(np.swapaxes(a_data, -1, -2), g), b_data.shape)
        return grad_a, grad_b

    return _record("matmul", np.matmul(a_data, b_data), (a, b), backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    _raise_for_suffix(a, b, "add")
    shape_a, shape_b = a.shape, b.shape
    return _record(
        "add",
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, shape_a), _unbroadcast(g, shape_b)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _raise_for_suffix(a, b, "sub")
    shape_a, shape_b = a.shape, b.shape
    return _record(
        "sub",
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, shape_a), _unbroadcast(-g, shape_b)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _raise_for_suffix(a, b, "mul")
    a_data, b_data = a.data, b.data
    return _record(
        "mul",
        a_data * b_data,
        (a, b),
        lambda g: (_unbroadcast(g * b_data, a_data.shape), _unbroadcast(g * a_data, b_data.shape)),
    )


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _record("scale", x.data * c, (x,), lambda g: (g * c,))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape_in = x.shape
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeMismatchError(f"Cannot reshape tensor of shape {shape_in} into {tuple(shape)}.")
    return _record("reshape", out, (x,), lambda g: (g.reshape(shape_in),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeMismatchError(f"Axes {axes} are not a permutation for a {x.ndim}-d tensor.")
    inverse = tuple(np.argsort(axes))
    return _record(
        "transpose", np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),)
    )


def take(x: Tensor, indices: Union[int, Sequence[int], np.ndarray]) -> Tensor:
    """
    Gather slices of `x` along its first axis.

    Parameters
    ----------
    x : Tensor
        Tensor of shape [n, ...].
    indices : int or array_like of int
        Indices into the first axis; with an integer index the first axis is dropped, otherwise
        the output has shape indices.shape + x.shape[1:].
    """
    idx = np.asarray(indices, dtype=np.int64)
    n = x.shape[0] if x.ndim > 0 else 0
    if idx.size > 0 and (idx.min() < -n or idx.max() >= n):
        raise IndexOutOfRangeError(f"Index out of range for axis 0 with size {n}.")
    shape_in = x.shape

    def backward_fn(g):
        grad = np.zeros(shape_in)
        np.add.at(grad, idx, g)
        return (grad,)

    return _record("take", np.take(x.data, idx, axis=0), (x,), backward_fn)


def select(x: Tensor, i: int) -> Tensor:
    """Slice `x[i]` along the first axis."""
    return take(x, int(i))


def expand(x: Tensor, n: int) -> Tensor:
    """Repeat `x` `n` times along a new leading axis."""
    out = np.broadcast_to(x.data, (n,) + x.shape).copy()
    return _record("expand", out, (x,), lambda g: (g.sum(axis=0),))


def concat(a: Tensor, b: Tensor, axis: int = 0) -> Tensor:
    """
    Concatenate two tensors along `axis`; all other dimensions must agree.
    """
    if a.ndim != b.ndim:
        raise ShapeMismatchError(f"`concat`: ranks of {a.shape} and {b.shape} differ.")
    axis = axis % a.ndim
    other_a = a.shape[:axis] + a.shape[axis + 1:]
    other_b = b.shape[:axis] + b.shape[axis + 1:]
    if other_a != other_b:
        raise ShapeMismatchError(
            f"`concat`: shapes {a.shape} and {b.shape} differ outside axis {axis}."
        )
    split_at = a.shape[axis]

    def backward_fn(g):
        grad_a, grad_b = np.split(g, [split_at], axis=axis)
        return grad_a, grad_b

    return _record("concat", np.concatenate([a.data, b.data], axis=axis), (a, b), backward_fn)


def sum(x: Tensor, axis: Optional[int] = None) -> Tensor:
    shape_in = x.shape

    def backward_fn(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape_in).copy(),)

    return _record("sum", np.sum(x.data, axis=axis), (x,), backward_fn)


def mean(x: Tensor, axis: Optional[int] = None) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    return scale(sum(x, axis=axis), 1 / count)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """
    Numerically stable softmax along `axis`; entries equal to -inf receive zero probability.
    """
    y = special.softmax(x.data, axis=axis)

    def backward_fn(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _record("softmax", y, (x,), backward_fn)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Layer normalization over the last dimension, followed by an elementwise affine map.

    Parameters
    ----------
    x : Tensor
        Input of shape [..., D].
    gamma, beta : Tensor
        Scale and shift, both of shape [D].
    eps : float
        Non-negative constant added to the variance.
    """
    if eps < 0:
        raise ValueError(f"`eps` should be non-negative, but is {eps}.")
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeMismatchError(
            f"`layer_norm`: gamma {gamma.shape} and beta {beta.shape} should have shape ({d},)."
        )
    x_data, gamma_data = x.data, gamma.data
    mu = x_data.mean(axis=-1, keepdims=True)
    centered = x_data - mu
    inv_std = 1 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    x_hat = centered * inv_std

    def backward_fn(g):
        d_x_hat = g * gamma_data
        grad_x = (inv_std / d) * (
            d * d_x_hat
            - d_x_hat.sum(axis=-1, keepdims=True)
            - x_hat * (d_x_hat * x_hat).sum(axis=-1, keepdims=True)
        )
        grad_gamma = (g * x_hat).reshape(-1, d).sum(axis=0)
        grad_beta = g.reshape(-1, d).sum(axis=0)
        return grad_x, grad_gamma, grad_beta

    return _record("layer_norm", x_hat * gamma_data + beta.data, (x, gamma, beta), backward_fn)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) Gaussian error linear unit."""
    value, derivative = _gelu_fn(x.data)
    return _record("gelu", value, (x,), lambda g: (g * derivative,))


def cross_entropy(logits: Tensor, labels: Union[Sequence[int], np.ndarray]) -> Tensor:
    """
    Mean negative log-likelihood of integer labels under softmax-normalized logits.

    Parameters
    ----------
    logits : Tensor
        Unnormalized scores of shape [b, C].
    labels : array_like of int
        Class indices of shape [b], each in [0, C).

    Returns
    -------
    Tensor
        Scalar loss.

    Raises
    ------
    LabelOutOfRangeError, ShapeMismatchError, EmptyInputError
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatchError(
            f"`cross_entropy` expects logits [b, C] and labels [b]; got {logits.shape} and "
            f"{labels.shape}."
        )
    b, n_classes = logits.shape
    if b == 0:
        raise EmptyInputError("`cross_entropy` received an empty batch.")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise LabelOutOfRangeError(f"Labels should lie in [0, {n_classes}).")
    log_probs = special.log_softmax(logits.data, axis=1)
    rows = np.arange(b)
    loss = -log_probs[rows, labels].mean()

    def backward_fn(g):
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1
        return (grad * (g / b),)

    return _record("cross_entropy", np.asarray(loss), (logits,), backward_fn)
