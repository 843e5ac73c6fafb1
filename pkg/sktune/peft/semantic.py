"""
Fine-tuning methods conditioning the frozen model on a real prompt text, which the frozen model
itself encodes:

`SKPrompt` refines the prompt's token embeddings with a residual adapter and prepends them to
the input embeddings. The prompt never passes through the transformer on its own.

`SKPrefix` runs the prompt through the frozen model once, and projects the input hidden state of
every block into that block's attention keys and values.
"""

# Standard library
from typing import Dict, Optional, Sequence, Tuple
import logging

# 3rd-party packages
import numpy as np

# Self
from .. import helpers
from .. import tensor as T
from ..tensor import Tensor, no_grad
from ..model import FrozenModel
from ..data import param_data
from ..exceptions import IllegalPrefixLengthError, SequenceEmptyError
from .adapters import AdapterF, AdapterG, Component
from .method_superclass import PeftMethod


__all__ = ["SKPrompt", "SKPrefix"]


logger = logging.getLogger(__name__)


def _prompt_array(prompt_ids: Sequence[int], model: FrozenModel) -> np.ndarray:
    ids = helpers.as_id_array(prompt_ids)
    if ids.ndim != 1 or ids.size == 0:
        raise IllegalPrefixLengthError("The prompt should contain at least one token.")
    helpers.raise_for_token_ids(ids, model.config.vocab_size, "prompt_ids")
    helpers.raise_for_sequence_length(ids.size, model.config.max_seq, "prompt")
    return ids


class SKPrompt(PeftMethod):
    """
    Semantic prompt tuning: logits = head(M(G(E[prompt]) ⊕ E[input])), where E is the frozen token
    embedding, G a trainable stack of bottleneck-residual blocks initialized to the identity, and
    M the frozen transformer. G works at the scale of the root-mean-square norm of the prompt's
    embedding rows.

    Parameters
    ----------
    model : FrozenModel
    prompt_ids : Sequence[int]
        Token IDs of the prompt text; at least one.
    task_kind : str
    n_classes : int, optional
    seed : int
    bottleneck : int
        Width of the hidden layer of each adapter block.
    adapter_layers : int
        Number of stacked adapter blocks.
    """

    __slots__ = ("_prompt_ids", "_adapter")

    kind = "sk-prompt"

    def __init__(
        self,
        model: FrozenModel,
        prompt_ids: Sequence[int],
        task_kind: str,
        n_classes: Optional[int] = None,
        seed: int = 0,
        bottleneck: int = param_data.ADAPTER_BOTTLENECK,
        adapter_layers: int = param_data.ADAPTER_LAYERS,
    ):
        super().__init__(model, task_kind, n_classes, seed)
        self._prompt_ids = _prompt_array(prompt_ids, model)
        rows = model.embed(self._prompt_ids).data
        row_scale = float(np.sqrt(np.mean(np.sum(rows**2, axis=1))))
        self._adapter = AdapterG(
            model.config.d_model, bottleneck, adapter_layers, self._rng, scale=row_scale
        )
        return

    @property
    def prompt_ids(self) -> np.ndarray:
        return self._prompt_ids.copy()

    @property
    def adapter(self) -> AdapterG:
        return self._adapter

    def options(self):
        return {
            "prompt_ids": self._prompt_ids.tolist(),
            "bottleneck": self._adapter["0.W1"].shape[1],
            "adapter_layers": self._adapter.n_blocks,
        }

    def _components(self) -> Dict[str, Component]:
        return {"adapter_g": self._adapter}

    def prompt_embeddings(self) -> Tensor:
        """Adapted prompt embeddings, of shape [l, d]."""
        return self._adapter(self._model.embed(self._prompt_ids))

    def _encode(self, ids: np.ndarray) -> Tuple[Tensor, int]:
        prompt = self.prompt_embeddings()
        x = T.concat(T.expand(prompt, ids.shape[0]), self._model.embed(ids), axis=1)
        return self._model.forward(x).hidden, self._prompt_ids.size

    def attention_maps(self, input_ids: Sequence[int]) -> Tensor:
        """
        Attention maps over the adapted prompt followed by a single input, of shape
        [n_layers, n_heads, l + n, l + n].
        """
        ids = helpers.as_id_array(input_ids)
        if ids.ndim != 1 or ids.size == 0:
            raise SequenceEmptyError("The input should be a non-empty sequence of token IDs.")
        with no_grad():
            x = T.concat(self.prompt_embeddings(), self._model.embed(ids), axis=0)
            return self._model.forward(x, capture_attention=True).attn


class SKPrefix(PeftMethod):
    """
    Semantic prefix tuning: the prompt's per-block input hidden states h (computed once by the
    frozen model, without gradients) are projected by per-layer key and value heads into a
    key/value prefix, which the frozen model attends to while processing the input.

    Parameters
    ----------
    model : FrozenModel
    prompt_ids : Sequence[int]
        Token IDs of the prefix text; at least one.
    task_kind : str
    n_classes : int, optional
    seed : int
    """

    __slots__ = ("_prompt_ids", "_adapter", "_layer_states")

    kind = "sk-prefix"

    def __init__(
        self,
        model: FrozenModel,
        prompt_ids: Sequence[int],
        task_kind: str,
        n_classes: Optional[int] = None,
        seed: int = 0,
    ):
        super().__init__(model, task_kind, n_classes, seed)
        self._prompt_ids = _prompt_array(prompt_ids, model)
        self._adapter = AdapterF(model.config.n_layers, model.config.d_model, self._rng)
        self._layer_states: Optional[Tensor] = None
        return

    @property
    def prompt_ids(self) -> np.ndarray:
        return self._prompt_ids.copy()

    @property
    def adapter(self) -> AdapterF:
        return self._adapter

    def options(self):
        return {"prompt_ids": self._prompt_ids.tolist()}

    def _components(self) -> Dict[str, Component]:
        return {"adapter_f": self._adapter}

    def layer_states(self) -> Tensor:
        """
        Input hidden states of every block for the prompt, of shape [n_layers, l, d]. They are
        extracted on first use and cached, since the model is frozen.
        """
        if self._layer_states is None:
            self._layer_states = self._model.extract_layer_states(self._prompt_ids)
            logger.debug(f"Extracted prefix layer states of shape {self._layer_states.shape}.")
        return self._layer_states

    def prefix(self):
        """Key/value prefix of the current adapter."""
        return self._adapter.project(self.layer_states())

    def _encode(self, ids: np.ndarray) -> Tuple[Tensor, int]:
        return self._model.forward(self._model.embed(ids), self.prefix()).hidden, 0
