"""
This module contains the superclass `PeftMethod`, from which all fine-tuning method classes
inherit, and the `ParamCount` record returned by `PeftMethod.trainable_params`.
"""

# Standard library
from __future__ import annotations
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple, Union
import logging

# 3rd-party packages
import numpy as np

# Self
from .. import checkpoint, helpers
from .. import tensor as T
from ..tensor import Tensor, no_grad
from ..model import FrozenModel
from ..data import param_data, Batch, Vocab, resolve_task_kind
from ..exceptions import (
    SequenceEmptyError,
    CheckpointFormatError,
    ShapeMismatchError,
)
from .adapters import Component, TaskHead


__all__ = ["PeftMethod", "ParamCount"]


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamCount:
    """
    Trainable-parameter accounting of a method.

    Attributes
    ----------
    count : int
        Number of trainable scalars.
    percentage : float
        100·count / (|Θ| + count), or exactly 100 for full fine-tuning.
    breakdown : Dict[str, int]
        Number of scalars of each trainable tensor, by name.
    frozen_count : int
        Number of scalars of the frozen model, |Θ|.
    """
    count: int
    percentage: float
    breakdown: Dict[str, int]
    frozen_count: int


class PeftMethod:
    """
    Superclass of all fine-tuning methods.

    A method combines the frozen model with its own trainable components and a task head. Its
    subclasses implement `_encode`, which maps a batch of token IDs to final hidden states
    (possibly with leading prompt rows), and `_components`, which declares the trainable
    components besides the head.

    Parameters
    ----------
    model : FrozenModel
        The frozen model.
    task_kind : str
        Task kind (or alias) determining the pooling of hidden states.
    n_classes : int, optional
        Number of classes; defaults to the task kind's class count.
    seed : int
        Seed of the initialization of all trainable parameters.
    """

    __slots__ = ("_model", "_task_kind", "_n_classes", "_seed", "_rng", "_head")

    # Name of the method, as used on the command line; set by each subclass
    kind: str = None

    def __init__(
        self,
        model: FrozenModel,
        task_kind: str,
        n_classes: Optional[int] = None,
        seed: int = 0,
    ):
        self._model = model
        self._task_kind = resolve_task_kind(task_kind)
        self._n_classes = (
            param_data.N_CLASSES[self._task_kind] if n_classes is None else n_classes
        )
        self._seed = seed
        self._rng = np.random.default_rng(seed)
        self._head = TaskHead(model.config.d_model, self._n_classes, self._task_kind)
        return

    @property
    def name(self) -> str:
        """Name of the method including its variant, e.g. 'lora2'."""
        return self.kind

    @property
    def model(self) -> FrozenModel:
        return self._model

    @property
    def head(self) -> TaskHead:
        return self._head

    @property
    def task_kind(self) -> str:
        return self._task_kind

    @property
    def n_classes(self) -> int:
        return self._n_classes

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def components(self) -> Dict[str, Component]:
        """All trainable components by name, the task head last."""
        components = self._components()
        components["head"] = self._head
        return components

    @property
    def trainable(self) -> Dict[str, Tensor]:
        """All trainable tensors by qualified name ('<component>.<parameter>')."""
        return {
            f"{component_name}.{name}": tensor
            for component_name, component in self.components.items()
            for name, tensor in component
        }

    def options(self) -> Dict[str, Any]:
        """Method-specific options, stored in checkpoints."""
        return {}

    def _components(self) -> Dict[str, Component]:
        return {}

    def _encode(self, ids: np.ndarray) -> Tuple[Tensor, int]:
        """
        Map right-padded token IDs of shape [b, n] to final hidden states of shape [b, o + n, d],
        where `o` is the number of leading rows not belonging to the input (returned as well).
        """
        pass

    def forward_batch(self, batch: Batch) -> Tuple[Tensor, np.ndarray]:
        """
        Logits of all labeled positions of a batch.

        Sequence and entailment tasks read the hidden state of the last real input token of each
        row; token tasks read every real input position.

        Returns
        -------
        logits, targets : Tuple[Tensor, numpy.ndarray]
            Logits of shape [k, n_classes], and the `k` corresponding labels.
        """
        lengths = np.asarray(batch.lengths, dtype=np.int64)
        if lengths.size == 0 or lengths.min() < 1:
            raise SequenceEmptyError("Every input should contain at least one token.")
        hidden, offset = self._encode(helpers.as_id_array(batch.ids))
        b, n_total, d = hidden.shape
        flat = T.reshape(hidden, (b * n_total, d))
        if self._task_kind == "token":
            rows = np.concatenate(
                [i * n_total + offset + np.arange(length) for i, length in enumerate(lengths)]
            )
            targets = np.concatenate(
                [np.asarray(batch.labels)[i, :length] for i, length in enumerate(lengths)]
            )
        else:
            rows = np.arange(b) * n_total + offset + lengths - 1
            targets = np.asarray(batch.labels)
        return self._head(T.take(flat, rows)), targets

    def forward(self, input_ids: Union[Sequence[int], np.ndarray]) -> Tensor:
        """
        Logits for a single input sequence.

        Parameters
        ----------
        input_ids : array_like of int
            Token IDs of shape [n], with n ≥ 1.

        Returns
        -------
        Tensor
            Logits of shape [n_classes], or [n, n_classes] for token tasks.

        Raises
        ------
        SequenceEmptyError, SequenceTooLongError, TokenOutOfRangeError
        """
        ids = helpers.as_id_array(input_ids)
        if ids.ndim != 1 or ids.size == 0:
            raise SequenceEmptyError("The input should be a non-empty sequence of token IDs.")
        n = ids.size
        labels = np.zeros((1, n) if self._task_kind == "token" else (1,), dtype=np.int64)
        batch = Batch(
            ids=ids[None, :], lengths=np.array([n]), labels=labels, task_kind=self._task_kind
        )
        logits, _ = self.forward_batch(batch)
        return logits if self._task_kind == "token" else T.take(logits, 0)

    def loss(self, batch: Batch) -> Tensor:
        """Mean cross-entropy of the batch's labeled positions."""
        logits, targets = self.forward_batch(batch)
        return T.cross_entropy(logits, targets)

    def predict(self, batch: Batch) -> Tuple[np.ndarray, np.ndarray]:
        """Argmax predictions and labels of the batch's labeled positions, without recording."""
        with no_grad():
            logits, targets = self.forward_batch(batch)
        return np.argmax(logits.data, axis=1), targets

    def trainable_params(self) -> ParamCount:
        """
        Exact enumeration of the trainable scalars.
        """
        breakdown = {name: tensor.size for name, tensor in self.trainable.items()}
        count = sum(breakdown.values())
        frozen_count = self._model.num_params
        return ParamCount(
            count=count,
            percentage=self._percentage(count, frozen_count),
            breakdown=breakdown,
            frozen_count=frozen_count,
        )

    @staticmethod
    def _percentage(count: int, frozen_count: int) -> float:
        return 100 * count / (frozen_count + count)

    def metadata(self) -> Dict[str, Any]:
        return {
            "kind": self.name,
            "task_kind": self._task_kind,
            "n_classes": self._n_classes,
            "seed": self._seed,
            **self.options(),
        }

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Copies of all trainable arrays by qualified name."""
        return {name: tensor.numpy() for name, tensor in self.trainable.items()}

    def save(self, path: Union[str, Path], vocab: Optional[Vocab] = None) -> None:
        """
        Write all trainable parameters to an SKT1 checkpoint with a "method" object, and with a
        "vocab" list of tokens (by ID) when the vocabulary encoding the prompt and the data is
        given.
        """
        metadata = {"method": self.metadata()}
        if vocab is not None:
            metadata["vocab"] = list(vocab.tokens)
        checkpoint.save(path, self.trainable, **metadata)
        return

    def load(self, path: Union[str, Path]) -> None:
        """
        Overwrite all trainable parameters with those of an SKT1 checkpoint written by a method
        of the same kind and shapes.

        Raises
        ------
        CheckpointFormatError
        """
        arrays, metadata = checkpoint.load(path)
        method = metadata.get("method")
        if not isinstance(method, dict) or method.get("kind") != self.name:
            raise CheckpointFormatError(f"Checkpoint {path} was not written by a {self.name!r}.")
        trainable = self.trainable
        if sorted(arrays) != sorted(trainable):
            raise CheckpointFormatError(f"Checkpoint {path} has different parameter names.")
        try:
            for name, tensor in trainable.items():
                tensor.data = arrays[name]
        except ShapeMismatchError as e:
            raise CheckpointFormatError(f"Checkpoint {path}: {e}") from None
        return

    @contextmanager
    def substitute(self, name: str, tensor: Tensor) -> Iterator[None]:
        """
        Temporarily replace the trainable tensor `name` by another tensor of the same shape,
        e.g. to differentiate the method's loss with respect to a free variable.
        """
        component_name, _, param_name = name.partition(".")
        params = self.components[component_name].params
        original = params[param_name]
        if tensor.shape != original.shape:
            raise ShapeMismatchError(f"Substitute for {name!r} should have shape {original.shape}.")
        params[param_name] = tensor
        try:
            yield
        finally:
            params[param_name] = original

    def __repr__(self) -> str:
        return f"{type(self).__name__}(task_kind={self._task_kind!r}, seed={self._seed})"
