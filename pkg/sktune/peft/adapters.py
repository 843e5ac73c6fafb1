"""
Trainable building blocks shared by the fine-tuning methods: the semantic adapters
(`AdapterF` for prefixes, `AdapterG` for prompts), two-layer MLPs, virtual-token tables,
low-rank weight deltas and the task head.

Every component owns an ordered mapping of named parameter tensors, all requiring gradients.
"""

# Standard library
from typing import Dict, Iterator, Mapping, Optional, Tuple

# 3rd-party packages
import numpy as np

# Self
from .. import tensor as T
from ..tensor import Tensor
from ..model import KvPrefix
from ..data import param_data
from ..exceptions import BadRankError, ShapeMismatchError


__all__ = [
    "Component",
    "AdapterF",
    "AdapterG",
    "Mlp",
    "VirtualTokens",
    "LowRankDeltas",
    "TaskHead",
]


class Component:
    """
    Superclass for all trainable components.

    Parameters
    ----------
    params : Mapping[str, numpy.ndarray or Tensor]
        Initial values of the parameters by name; the arrays are copied into tensors requiring
        gradients.
    """

    __slots__ = ("_params",)

    def __init__(self, params: Mapping[str, object]):
        self._params: Dict[str, Tensor] = {
            name: Tensor(value.data if isinstance(value, Tensor) else value, requires_grad=True)
            for name, value in params.items()
        }
        return

    @property
    def params(self) -> Dict[str, Tensor]:
        return self._params

    @property
    def num_params(self) -> int:
        return sum(tensor.size for tensor in self._params.values())

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __iter__(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())


class AdapterF(Component):
    """
    Per-layer linear key and value heads, projecting the hidden states of a prefix text into a
    key/value prefix. Value heads start at zero, so that all prefix values vanish at
    initialization.

    Parameters
    ----------
    n_layers : int
        Number of layers of the model.
    d_model : int
        Width of the model.
    rng : numpy.random.Generator
        Generator for the initialization of the key heads.
    """

    __slots__ = ("_n_layers",)

    def __init__(self, n_layers: int, d_model: int, rng: np.random.Generator):
        params = {}
        for j in range(n_layers):
            params[f"{j}.W_k"] = rng.normal(0, 1 / np.sqrt(d_model), (d_model, d_model))
            params[f"{j}.b_k"] = np.zeros(d_model)
            params[f"{j}.W_v"] = np.zeros((d_model, d_model))
            params[f"{j}.b_v"] = np.zeros(d_model)
        super().__init__(params)
        self._n_layers = n_layers
        return

    def project(self, layer_states: Tensor) -> KvPrefix:
        """
        Map hidden states of shape [n_layers, l, d] to a key/value prefix of length l.
        """
        if layer_states.ndim != 3 or layer_states.shape[0] != self._n_layers:
            raise ShapeMismatchError(
                f"Layer states should have shape [{self._n_layers}, l, d], "
                f"but have {layer_states.shape}."
            )
        keys, values = [], []
        for j in range(self._n_layers):
            h_j = T.take(layer_states, j)
            keys.append(T.add(T.matmul(h_j, self[f"{j}.W_k"]), self[f"{j}.b_k"]))
            values.append(T.add(T.matmul(h_j, self[f"{j}.W_v"]), self[f"{j}.b_v"]))
        return KvPrefix(keys, values)


class AdapterG(Component):
    """
    Stack of bottleneck-residual blocks refining prompt embeddings row by row:
    e ← e + s·(gelu((e/s)·W1 + b1)·W2 + b2) for each block, where the scale s is the typical
    row norm of the embeddings being refined. With W2 and b2 at zero, every block (and so the
    whole adapter) is the identity map.

    The scale keeps the inputs of the hidden layer near unit norm, and lets the updates of W2
    move the rows by amounts comparable to their own size.

    Parameters
    ----------
    d_model : int
        Width of the embeddings.
    bottleneck : int
        Width of the hidden layer of each block.
    n_blocks : int
        Number of stacked blocks.
    rng : numpy.random.Generator
        Generator for the initialization of the W1 matrices.
    scale : float, optional; default: 1
        Row-norm scale s; positive.
    """

    __slots__ = ("_n_blocks", "_scale")

    def __init__(
        self,
        d_model: int,
        bottleneck: int,
        n_blocks: int,
        rng: np.random.Generator,
        scale: float = 1.0,
    ):
        if bottleneck < 1 or n_blocks < 1:
            raise ValueError("Bottleneck width and number of blocks should be positive.")
        if not (np.isfinite(scale) and scale > 0):
            raise ValueError(f"`scale` should be positive, but is {scale}.")
        params = {}
        for k in range(n_blocks):
            params[f"{k}.W1"] = rng.normal(0, 1, (d_model, bottleneck))
            params[f"{k}.b1"] = np.zeros(bottleneck)
            params[f"{k}.W2"] = np.zeros((bottleneck, d_model))
            params[f"{k}.b2"] = np.zeros(d_model)
        super().__init__(params)
        self._n_blocks = n_blocks
        self._scale = float(scale)
        return

    @property
    def n_blocks(self) -> int:
        return self._n_blocks

    @property
    def scale(self) -> float:
        return self._scale

    def __call__(self, e: Tensor) -> Tensor:
        for k in range(self._n_blocks):
            pre = T.add(T.matmul(T.scale(e, 1 / self._scale), self[f"{k}.W1"]), self[f"{k}.b1"])
            update = T.add(T.matmul(T.gelu(pre), self[f"{k}.W2"]), self[f"{k}.b2"])
            e = T.add(e, T.scale(update, self._scale))
        return e


class Mlp(Component):
    """
    Two-layer perceptron x ↦ gelu(x·W1 + b1)·W2 + b2.
    """

    __slots__ = ()

    def __init__(self, d_in: int, d_hidden: int, d_out: int, rng: np.random.Generator):
        super().__init__(
            {
                "W1": rng.normal(0, 1 / np.sqrt(d_in), (d_in, d_hidden)),
                "b1": np.zeros(d_hidden),
                "W2": rng.normal(0, 1 / np.sqrt(d_hidden), (d_hidden, d_out)),
                "b2": np.zeros(d_out),
            }
        )
        return

    def __call__(self, x: Tensor) -> Tensor:
        hidden = T.gelu(T.add(T.matmul(x, self["W1"]), self["b1"]))
        return T.add(T.matmul(hidden, self["W2"]), self["b2"])


class VirtualTokens(Component):
    """
    Table of trainable embedding rows without vocabulary entries.
    """

    __slots__ = ()

    def __init__(
        self,
        n_virtual: int,
        d_model: int,
        rng: np.random.Generator,
        std: float = param_data.VIRTUAL_INIT_STD,
    ):
        if n_virtual < 0:
            raise ValueError(f"`n_virtual` should be non-negative, but is {n_virtual}.")
        super().__init__({"embeddings": rng.normal(0, std, (n_virtual, d_model))})
        return

    @property
    def embeddings(self) -> Tensor:
        return self["embeddings"]


class LowRankDeltas(Component):
    """
    Low-rank updates W + (alpha / rank)·A·B of a set of frozen matrices, with A drawn from a
    normal distribution and B at zero.

    Parameters
    ----------
    targets : Mapping[str, Tuple[int, int]]
        Shapes of the wrapped matrices, by parameter name.
    rank : int
        Rank of the updates; between 1 and the smaller dimension of every wrapped matrix.
    rng : numpy.random.Generator
    alpha : float, optional
        Scaling numerator; defaults to `rank`.
    """

    __slots__ = ("_targets", "_scale")

    def __init__(
        self,
        targets: Mapping[str, Tuple[int, int]],
        rank: int,
        rng: np.random.Generator,
        alpha: Optional[float] = None,
    ):
        max_rank = min(min(shape) for shape in targets.values())
        if isinstance(rank, bool) or not isinstance(rank, (int, np.integer)) or not (
            1 <= rank <= max_rank
        ):
            raise BadRankError(f"Rank should lie in [1, {max_rank}], but is {rank!r}.")
        params = {}
        for name, (d_in, d_out) in targets.items():
            params[f"{name}.A"] = rng.normal(0, 1 / np.sqrt(d_in), (d_in, rank))
            params[f"{name}.B"] = np.zeros((rank, d_out))
        super().__init__(params)
        self._targets = tuple(targets)
        self._scale = (rank if alpha is None else alpha) / rank
        return

    @property
    def targets(self) -> Tuple[str, ...]:
        return self._targets

    def merge(self, params: Mapping[str, Tensor]) -> Dict[str, Tensor]:
        """
        Parameter map in which every wrapped matrix is replaced by its updated version.
        """
        merged = dict(params)
        for name in self._targets:
            delta = T.matmul(self[f"{name}.A"], self[f"{name}.B"])
            merged[name] = T.add(params[name], T.scale(delta, self._scale))
        return merged


class TaskHead(Component):
    """
    Linear classifier h ↦ h·W + b over hidden states, starting at zero so that an untrained head
    scores every class equally.
    Parameters
    ----------
    d_model : int
    n_classes : int
        Number of classes; at least 2.
    task_kind : str
        One of 'sequence', 'token' and 'entailment'.
    """

    __slots__ = ("_task_kind", "_n_classes")

    def __init__(self, d_model: int, n_classes: int, task_kind: str):
        if n_classes < 2:
            raise ValueError(f"`n_classes` should be at least 2, but is {n_classes}.")
        if task_kind not in param_data.TASK_KINDS:
            raise ValueError(f"Unknown task kind {task_kind!r}.")
        super().__init__(
            {
                "W": np.zeros((d_model, n_classes)),
                "b": np.zeros(n_classes),
            }
        )
        self._task_kind = task_kind
        self._n_classes = n_classes
        return

    @property
    def task_kind(self) -> str:
        return self._task_kind

    @property
    def n_classes(self) -> int:
        return self._n_classes

    def __call__(self, h: Tensor) -> Tensor:
        return T.add(T.matmul(h, self["W"]), self["b"])
