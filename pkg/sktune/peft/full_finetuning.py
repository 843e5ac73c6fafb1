"""
Full fine-tuning: every parameter of the model is trained, on a private copy so that the
shared frozen model stays untouched.
"""

# Standard library
from typing import Dict, Optional, Tuple

# 3rd-party packages
import numpy as np

# Self
from ..tensor import Tensor
from ..model import FrozenModel
from .adapters import Component
from .method_superclass import PeftMethod


__all__ = ["FullFT"]


class FullFT(PeftMethod):

    __slots__ = ("_theta",)

    kind = "full"

    def __init__(
        self,
        model: FrozenModel,
        task_kind: str,
        n_classes: Optional[int] = None,
        seed: int = 0,
    ):
        super().__init__(model, task_kind, n_classes, seed)
        self._theta = Component(model.copy_params())
        return

    @property
    def theta(self) -> Dict[str, Tensor]:
        return self._theta.params

    def _components(self) -> Dict[str, Component]:
        return {"theta": self._theta}

    @staticmethod
    def _percentage(count: int, frozen_count: int) -> float:
        return 100.0

    def _encode(self, ids: np.ndarray) -> Tuple[Tensor, int]:
        p = self._theta.params
        return self._model.forward(self._model.embed(ids, p), params=p).hidden, 0
