"""
AdamW optimizer with decoupled weight decay.
"""

# Standard library
from typing import List, Optional, Sequence

# 3rd-party packages
import numpy as np

# Self
from .data import param_data
from .exceptions import MissingGradError, ShapeMismatchError
from .tensor import Tensor


__all__ = ["OptimState", "adamw_step"]


class OptimState:
    """
    State of the AdamW optimizer for a fixed list of parameters.

    Parameters
    ----------
    params : Sequence[Tensor]
        Parameters to be optimized; their order must be kept in every call to `adamw_step`.
    lr : float
        Learning rate.
    beta1, beta2 : float
        Decay rates of the first and second moment estimates.
    eps : float
        Constant added to the denominator of the update.
    weight_decay : float
        Coefficient of the decoupled weight decay.
    """

    __slots__ = ("lr", "beta1", "beta2", "eps", "weight_decay", "t", "m", "v")

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float,
        beta1: float = param_data.ADAM_BETA1,
        beta2: float = param_data.ADAM_BETA2,
        eps: float = param_data.ADAM_EPS,
        weight_decay: float = param_data.WEIGHT_DECAY,
    ):
        if lr < 0:
            raise ValueError(f"Learning rate should be non-negative, but is {lr}.")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m: List[np.ndarray] = [np.zeros(p.shape) for p in params]
        self.v: List[np.ndarray] = [np.zeros(p.shape) for p in params]
        return


def adamw_step(
    params: Sequence[Tensor],
    grads: Sequence[Optional[np.ndarray]],
    state: OptimState,
) -> None:
    """
    Update parameters in place by one AdamW step: first the decoupled weight decay
    p ← p - lr·wd·p, then the bias-corrected Adam update p ← p - lr·m̂ / (√v̂ + eps).

    Parameters
    ----------
    params : Sequence[Tensor]
        Trainable parameters, in the order used to create `state`.
    grads : Sequence[numpy.ndarray]
        Gradient of the loss with respect to each parameter.
    state : OptimState
        Optimizer state; its step counter is incremented by one.

    Raises
    ------
    MissingGradError
        When a gradient is absent.
    """
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ShapeMismatchError("Parameters, gradients and optimizer state differ in length.")
    for i, grad in enumerate(grads):
        if grad is None:
            raise MissingGradError(f"Parameter {i} (shape {params[i].shape}) has no gradient.")
    state.t += 1
    t, lr, b1, b2 = state.t, state.lr, state.beta1, state.beta2
    for param, grad, m, v in zip(params, grads, state.m, state.v):
        data = param.data
        data -= lr * state.weight_decay * data
        m *= b1
        m += (1 - b1) * grad
        v *= b2
        v += (1 - b2) * grad * grad
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return
