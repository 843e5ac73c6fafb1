"""
Baseline methods with virtual tokens: trainable vectors that have no counterpart in the
vocabulary.
"""

# Standard library
from typing import Dict, Optional, Tuple

# 3rd-party packages
import numpy as np

# Self
from .. import tensor as T
from ..tensor import Tensor
from ..model import FrozenModel, KvPrefix
from ..data import param_data
from .adapters import Component, Mlp, VirtualTokens
from .method_superclass import PeftMethod


__all__ = ["PromptVirtual", "PrefixVirtual", "PTuning"]


class _VirtualMethod(PeftMethod):
    """
    Superclass of the methods owning `n_virtual` trainable seed vectors.
    """

    __slots__ = ("_seeds",)

    def __init__(
        self,
        model: FrozenModel,
        task_kind: str,
        n_classes: Optional[int] = None,
        seed: int = 0,
        n_virtual: int = param_data.N_VIRTUAL,
    ):
        super().__init__(model, task_kind, n_classes, seed)
        self._seeds = VirtualTokens(n_virtual, model.config.d_model, self._rng)
        return

    @property
    def n_virtual(self) -> int:
        return self._seeds.embeddings.shape[0]

    def options(self):
        return {"n_virtual": self.n_virtual}

    def virtual_embeddings(self) -> Tensor:
        """Rows prepended to the input embeddings, of shape [n_virtual, d]."""
        return self._seeds.embeddings

    def _encode(self, ids: np.ndarray) -> Tuple[Tensor, int]:
        virtual = self.virtual_embeddings()
        x = T.concat(T.expand(virtual, ids.shape[0]), self._model.embed(ids), axis=1)
        return self._model.forward(x).hidden, self.n_virtual


class PromptVirtual(_VirtualMethod):
    """
    Prompt tuning: `n_virtual` soft-prompt embeddings, initialized from N(0, 0.02²), are
    prepended to the input embeddings.
    """

    __slots__ = ()

    kind = "prompt"

    def _components(self) -> Dict[str, Component]:
        return {"virtual": self._seeds}


class PTuning(_VirtualMethod):
    """
    P-tuning: the prepended virtual embeddings are produced by a shared two-layer encoder
    (d → d_ffn → d) over trainable seed vectors.
    """

    __slots__ = ("_encoder",)

    kind = "ptuning"

    def __init__(
        self,
        model: FrozenModel,
        task_kind: str,
        n_classes: Optional[int] = None,
        seed: int = 0,
        n_virtual: int = param_data.N_VIRTUAL,
    ):
        super().__init__(model, task_kind, n_classes, seed, n_virtual)
        d, d_ffn = model.config.d_model, model.config.d_ffn
        self._encoder = Mlp(d, d_ffn, d, self._rng)
        return

    def _components(self) -> Dict[str, Component]:
        return {"seeds": self._seeds, "encoder": self._encoder}

    def virtual_embeddings(self) -> Tensor:
        return self._encoder(self._seeds.embeddings)


class PrefixVirtual(_VirtualMethod):
    """
    Prefix tuning with reparameterization: seed vectors pass through a two-layer map
    (d → d_ffn → 2·n_layers·d), whose outputs are split into per-layer keys and values that
    every layer attends to.
    """

    __slots__ = ("_reparam",)

    kind = "prefix"

    def __init__(
        self,
        model: FrozenModel,
        task_kind: str,
        n_classes: Optional[int] = None,
        seed: int = 0,
        n_virtual: int = param_data.N_VIRTUAL,
    ):
        super().__init__(model, task_kind, n_classes, seed, n_virtual)
        cfg = model.config
        self._reparam = Mlp(cfg.d_model, cfg.d_ffn, 2 * cfg.n_layers * cfg.d_model, self._rng)
        return

    def _components(self) -> Dict[str, Component]:
        return {"seeds": self._seeds, "reparam": self._reparam}

    def prefix(self) -> KvPrefix:
        """
        Key/value prefix of length `n_virtual` for every layer.
        """
        cfg = self._model.config
        m, d = cfg.n_layers, cfg.d_model
        out = self._reparam(self._seeds.embeddings)
        # [nv, 2md] -> [m, 2, nv, d]
        kv = T.transpose(T.reshape(out, (self.n_virtual, m, 2, d)), (1, 2, 0, 3))
        keys, values = [], []
        for j in range(m):
            layer = T.take(kv, j)
            keys.append(T.take(layer, 0))
            values.append(T.take(layer, 1))
        return KvPrefix(keys, values)

    def _encode(self, ids: np.ndarray) -> Tuple[Tensor, int]:
        return self._model.forward(self._model.embed(ids), self.prefix()).hidden, 0
