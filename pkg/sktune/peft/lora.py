"""
Low-rank adaptation of the attention query and value matrices.
"""

# Standard library
from typing import Dict, Optional, Tuple

# 3rd-party packages
import numpy as np

# Self
from ..tensor import Tensor
from ..model import FrozenModel
from .adapters import Component, LowRankDeltas
from .method_superclass import PeftMethod


__all__ = ["LoRA", "lora_targets"]


def lora_targets(model: FrozenModel) -> Dict[str, Tuple[int, int]]:
    """Names and shapes of the matrices wrapped by `LoRA`: every layer's Wq and Wv."""
    params = model.params
    return {
        f"layers.{j}.attn.{name}": params[f"layers.{j}.attn.{name}"].shape
        for j in range(model.config.n_layers)
        for name in ("Wq", "Wv")
    }


class LoRA(PeftMethod):
    """
    LoRA: every layer's Wq and Wv act as W + (alpha / rank)·A·B, where the frozen W stays
    untouched, A is drawn from a normal distribution and B starts at zero.

    Parameters
    ----------
    model : FrozenModel
    task_kind : str
    rank : int
        Rank of the updates, between 1 and d_model.
    n_classes : int, optional
    seed : int
    alpha : float, optional
        Scaling numerator; defaults to `rank`.

    Raises
    ------
    BadRankError
    """

    __slots__ = ("_rank", "_deltas")

    kind = "lora"

    def __init__(
        self,
        model: FrozenModel,
        task_kind: str,
        rank: int,
        n_classes: Optional[int] = None,
        seed: int = 0,
        alpha: Optional[float] = None,
    ):
        super().__init__(model, task_kind, n_classes, seed)
        self._deltas = LowRankDeltas(lora_targets(model), rank, self._rng, alpha)
        self._rank = int(rank)
        return

    @property
    def name(self) -> str:
        return f"lora{self._rank}"

    @property
    def rank(self) -> int:
        return self._rank

    def options(self):
        return {"rank": self._rank}

    def _components(self) -> Dict[str, Component]:
        return {"lora": self._deltas}

    def _encode(self, ids: np.ndarray) -> Tuple[Tensor, int]:
        p = self._deltas.merge(self._model.params)
        return self._model.forward(self._model.embed(ids, p), params=p).hidden, 0
