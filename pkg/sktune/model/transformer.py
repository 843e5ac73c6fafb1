"""
This module contains the frozen decoder transformer `FrozenModel` and the key/value prefix
`KvPrefix` that can be injected into its attention layers.

The model is a pre-layer-norm causal decoder: learned token and absolute-position embeddings,
`n_layers` blocks of multi-head self-attention and a GELU feed-forward network (each wrapped in a
residual connection), and a final layer normalization. Token embeddings are looked up by `embed`
without positions; positions are added inside `forward`, after any concatenation of embeddings.

Prefix slots act as extra keys and values in every layer. They are visible to every real position,
receive no positional embedding and produce no output rows.
"""

# Standard library
from __future__ import annotations
from pathlib import Path
from typing import Dict, Mapping, NamedTuple, Optional, Sequence, Union
import logging

# 3rd-party packages
import numpy as np

# Self
from .. import checkpoint, helpers
from .. import tensor as T
from ..tensor import Tensor, no_grad
from ..exceptions import (
    ShapeMismatchError,
    PrefixLayerMismatchError,
    CheckpointFormatError,
)
from .config import ModelConfig


__all__ = ["FrozenModel", "KvPrefix", "ForwardOutput", "init_params", "param_shapes"]


logger = logging.getLogger(__name__)


class KvPrefix:
    """
    Per-layer key and value rows prepended to the attention keys and values of a model.

    Parameters
    ----------
    keys, values : Sequence[Tensor]
        One tensor of shape [l, d_model] per layer; all with the same `l`.
    """

    __slots__ = ("_keys", "_values")

    def __init__(self, keys: Sequence[Tensor], values: Sequence[Tensor]):
        if len(keys) != len(values):
            raise PrefixLayerMismatchError(
                f"Prefix has {len(keys)} key layers but {len(values)} value layers."
            )
        shapes = {t.shape for t in keys} | {t.shape for t in values}
        if len(shapes) > 1 or any(len(shape) != 2 for shape in shapes):
            raise ShapeMismatchError(f"All prefix keys and values should share one [l, d] shape.")
        self._keys = tuple(keys)
        self._values = tuple(values)
        return

    @classmethod
    def empty(cls, n_layers: int, d_model: int) -> KvPrefix:
        """Prefix of length 0."""
        rows = [Tensor(np.zeros((0, d_model))) for _ in range(n_layers)]
        return cls(rows, rows)

    @property
    def keys(self) -> tuple:
        return self._keys

    @property
    def values(self) -> tuple:
        return self._values

    @property
    def n_layers(self) -> int:
        return len(self._keys)

    @property
    def length(self) -> int:
        return self._keys[0].shape[0] if self._keys else 0


class ForwardOutput(NamedTuple):
    hidden: Tensor
    attn: Optional[Tensor] = None


def param_shapes(config: ModelConfig) -> Dict[str, tuple]:
    """Shapes of all parameters of a model with the given configuration, in creation order."""
    d, d_ffn = config.d_model, config.d_ffn
    layer_shapes = {
        "ln1.gamma": (d,),
        "ln1.beta": (d,),
        "attn.Wq": (d, d),
        "attn.Wk": (d, d),
        "attn.Wv": (d, d),
        "attn.Wo": (d, d),
        "ln2.gamma": (d,),
        "ln2.beta": (d,),
        "ffn.W1": (d, d_ffn),
        "ffn.b1": (d_ffn,),
        "ffn.W2": (d_ffn, d),
        "ffn.b2": (d,),
    }
    shapes = {"token_emb": (config.vocab_size, d), "pos_emb": (config.max_seq, d)}
    for j in range(config.n_layers):
        shapes.update({f"layers.{j}.{name}": shape for name, shape in layer_shapes.items()})
    shapes.update({"final_ln.gamma": (d,), "final_ln.beta": (d,)})
    return shapes


def init_params(config: ModelConfig) -> Dict[str, Tensor]:
    """
    Seeded random initialization of all parameters.

    Token embeddings are drawn from N(0, 0.5²), positional embeddings from N(0, 0.1²), weight
    matrices from N(0, 1/fan_in); biases and layer-norm shifts are zero and layer-norm scales one.
    """
    rng = np.random.default_rng(config.seed)
    d, d_ffn = config.d_model, config.d_ffn
    params = {
        "token_emb": rng.normal(0, 0.5, (config.vocab_size, d)),
        "pos_emb": rng.normal(0, 0.1, (config.max_seq, d)),
    }
    for j in range(config.n_layers):
        prefix = f"layers.{j}."
        params[prefix + "ln1.gamma"] = np.ones(d)
        params[prefix + "ln1.beta"] = np.zeros(d)
        for name in ("Wq", "Wk", "Wv", "Wo"):
            params[prefix + f"attn.{name}"] = rng.normal(0, 1 / np.sqrt(d), (d, d))
        params[prefix + "ln2.gamma"] = np.ones(d)
        params[prefix + "ln2.beta"] = np.zeros(d)
        params[prefix + "ffn.W1"] = rng.normal(0, 1 / np.sqrt(d), (d, d_ffn))
        params[prefix + "ffn.b1"] = np.zeros(d_ffn)
        params[prefix + "ffn.W2"] = rng.normal(0, 1 / np.sqrt(d_ffn), (d_ffn, d))
        params[prefix + "ffn.b2"] = np.zeros(d)
    params["final_ln.gamma"] = np.ones(d)
    params["final_ln.beta"] = np.zeros(d)
    return {name: Tensor(value) for name, value in params.items()}


class FrozenModel:
    """
    Decoder transformer whose parameters are frozen (not requiring gradients) unless explicitly
    unfrozen, e.g. during pretraining.

    Parameters
    ----------
    config : ModelConfig
        Configuration of the model.
    params : Mapping[str, Tensor], optional
        Parameters by name; a seeded random initialization (see `init_params`) when not given.
    frozen : bool
        Whether to freeze the parameters.
    """

    __slots__ = ("_config", "_params", "_frozen")

    def __init__(
        self,
        config: ModelConfig,
        params: Optional[Mapping[str, Tensor]] = None,
        frozen: bool = True,
    ):
        self._config = config
        self._params = init_params(config) if params is None else dict(params)
        expected = param_shapes(config)
        if sorted(self._params) != sorted(expected):
            raise ValueError("Parameter names do not match the model configuration.")
        for name, shape in expected.items():
            if self._params[name].shape != shape:
                raise ShapeMismatchError(
                    f"Parameter {name!r} has shape {self._params[name].shape}, expected {shape}."
                )
        self._frozen = None
        if frozen:
            self.freeze()
        else:
            self.unfreeze()
        return

    @property
    def config(self) -> ModelConfig:
        return self._config

    @property
    def params(self) -> Dict[str, Tensor]:
        """Parameters by name (a new dict over the same tensors)."""
        return dict(self._params)

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def num_params(self) -> int:
        return sum(tensor.size for tensor in self._params.values())

    def freeze(self) -> None:
        for tensor in self._params.values():
            tensor.requires_grad = False
            tensor.grad = None
        self._frozen = True
        return

    def unfreeze(self) -> None:
        for tensor in self._params.values():
            tensor.requires_grad = True
        self._frozen = False
        return

    def copy_params(self, requires_grad: bool = False) -> Dict[str, Tensor]:
        """Private copy of all parameters."""
        return {
            name: Tensor(tensor.data, requires_grad=requires_grad)
            for name, tensor in self._params.items()
        }

    def save(self, path: Union[str, Path]) -> None:
        """Write the parameters and configuration to an SKT1 checkpoint."""
        checkpoint.save(path, self._params, config=self._config.to_dict())
        return

    def dumps(self) -> str:
        """SKT1 document of the parameters and configuration."""
        return checkpoint.dumps(self._params, config=self._config.to_dict())

    @classmethod
    def load(cls, path: Union[str, Path]) -> FrozenModel:
        """
        Read a frozen model from an SKT1 checkpoint carrying a "config" object.

        Raises
        ------
        CheckpointFormatError
        """
        arrays, metadata = checkpoint.load(path)
        if "config" not in metadata:
            raise CheckpointFormatError(f"Checkpoint {path} has no model configuration.")
        try:
            config = ModelConfig.from_dict(metadata["config"])
            return cls(config, {name: Tensor(value) for name, value in arrays.items()})
        except (ValueError, TypeError) as e:
            raise CheckpointFormatError(f"Checkpoint {path} does not describe a model ({e}).")

    def embed(
        self,
        ids: Union[Sequence[int], np.ndarray],
        params: Optional[Mapping[str, Tensor]] = None,
    ) -> Tensor:
        """
        Look up token embeddings (without positions).

        Parameters
        ----------
        ids : array_like of int
            Token IDs of shape [n] or [b, n].
        params : Mapping[str, Tensor], optional
            Parameters overriding the model's own (e.g. a private copy).

        Returns
        -------
        Tensor
            Embeddings of shape ids.shape + [d_model].

        Raises
        ------
        TokenOutOfRangeError
        """
        ids = helpers.as_id_array(ids)
        helpers.raise_for_token_ids(ids, self._config.vocab_size)
        p = self._params if params is None else params
        return T.take(p["token_emb"], ids)

    def forward(
        self,
        emb: Tensor,
        prefix: Optional[KvPrefix] = None,
        capture_attention: bool = False,
        params: Optional[Mapping[str, Tensor]] = None,
    ) -> ForwardOutput:
        """
        Run the transformer on a sequence (or a right-padded batch) of input embeddings.

        Parameters
        ----------
        emb : Tensor
            Input embeddings of shape [n, d_model], or [b, n, d_model] for a batch.
        prefix : KvPrefix, optional
            Key/value prefix injected into every layer; no prefix is equivalent to an empty one.
        capture_attention : bool
            Whether to return the attention maps of all layers and heads.
        params : Mapping[str, Tensor], optional
            Parameters overriding the model's own.

        Returns
        -------
        ForwardOutput
            `hidden`: final-layer-norm hidden states with the shape of `emb`;
            `attn`: attention maps of shape [n_layers, n_heads, n, l + n] ([n_layers, b, n_heads,
            n, l + n] for a batch) when `capture_attention` is set.

        Raises
        ------
        ShapeMismatchError, SequenceTooLongError, PrefixLayerMismatchError
        """
        cfg = self._config
        p = self._params if params is None else params
        batched = emb.ndim == 3
        if emb.ndim not in (2, 3) or emb.shape[-1] != cfg.d_model:
            raise ShapeMismatchError(
                f"Embeddings should have shape [n, {cfg.d_model}] or [b, n, {cfg.d_model}], "
                f"but have {emb.shape}."
            )
        x = emb if batched else T.reshape(emb, (1,) + emb.shape)
        n = x.shape[1]
        helpers.raise_for_sequence_length(n, cfg.max_seq, "input")
        if prefix is None:
            prefix = KvPrefix.empty(cfg.n_layers, cfg.d_model)
        elif prefix.n_layers != cfg.n_layers:
            raise PrefixLayerMismatchError(
                f"Prefix has {prefix.n_layers} layers, but the model has {cfg.n_layers}."
            )
        elif prefix.keys[0].shape[1] != cfg.d_model:
            raise ShapeMismatchError(f"Prefix width should be {cfg.d_model}.")
        maps = [] if capture_attention else None
        x = self._run(x, p, prefix, maps)
        hidden = T.layer_norm(x, p["final_ln.gamma"], p["final_ln.beta"], cfg.ln_eps)
        if not batched:
            hidden = T.reshape(hidden, hidden.shape[1:])
        attn = None
        if capture_attention:
            stacked = np.stack(maps)
            attn = Tensor(stacked if batched else stacked[:, 0])
        return ForwardOutput(hidden, attn)

    def extract_layer_states(self, prompt_ids: Union[Sequence[int], np.ndarray]) -> Tensor:
        """
        Run the model on a prompt alone and collect the input hidden state of every block.

        Parameters
        ----------
        prompt_ids : array_like of int
            Token IDs of shape [l], with 1 ≤ l ≤ max_seq.

        Returns
        -------
        Tensor
            Hidden states of shape [n_layers, l, d_model], not requiring gradients.

        Raises
        ------
        SequenceEmptyError, SequenceTooLongError, TokenOutOfRangeError
        """
        ids = helpers.as_id_array(prompt_ids)
        helpers.raise_for_sequence_length(ids.size, self._config.max_seq, "prompt")
        cfg = self._config
        states = []
        with no_grad():
            x = T.reshape(self.embed(ids), (1, ids.size, cfg.d_model))
            empty = KvPrefix.empty(cfg.n_layers, cfg.d_model)
            self._run(x, self._params, empty, maps=None, states=states)
        return Tensor(np.stack(states))

    def _run(
        self,
        x: Tensor,
        p: Mapping[str, Tensor],
        prefix: KvPrefix,
        maps: Optional[list],
        states: Optional[list] = None,
    ) -> Tensor:
        # Add positions, then apply every block to x of shape [b, n, d]
        n = x.shape[1]
        x = T.add(x, T.take(p["pos_emb"], np.arange(n)))
        mask = Tensor(_causal_mask(n, prefix.length))
        for j in range(self._config.n_layers):
            if states is not None:
                states.append(x.data[0].copy())
            x = self._block(x, j, p, prefix.keys[j], prefix.values[j], mask, maps)
        return x

    def _block(
        self,
        x: Tensor,
        j: int,
        p: Mapping[str, Tensor],
        prefix_keys: Tensor,
        prefix_values: Tensor,
        mask: Tensor,
        maps: Optional[list],
    ) -> Tensor:
        cfg = self._config
        name = f"layers.{j}."
        b = x.shape[0]
        h = T.layer_norm(x, p[name + "ln1.gamma"], p[name + "ln1.beta"], cfg.ln_eps)
        q = T.matmul(h, p[name + "attn.Wq"])
        k = T.concat(T.expand(prefix_keys, b), T.matmul(h, p[name + "attn.Wk"]), axis=1)
        v = T.concat(T.expand(prefix_values, b), T.matmul(h, p[name + "attn.Wv"]), axis=1)
        q, k, v = self._split_heads(q), self._split_heads(k), self._split_heads(v)
        scores = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1 / np.sqrt(cfg.d_head))
        attn = T.softmax(T.add(scores, mask), axis=-1)
        if maps is not None:
            maps.append(attn.data.copy())
        out = self._merge_heads(T.matmul(attn, v))
        x = T.add(x, T.matmul(out, p[name + "attn.Wo"]))
        h = T.layer_norm(x, p[name + "ln2.gamma"], p[name + "ln2.beta"], cfg.ln_eps)
        h = T.gelu(T.add(T.matmul(h, p[name + "ffn.W1"]), p[name + "ffn.b1"]))
        return T.add(x, T.add(T.matmul(h, p[name + "ffn.W2"]), p[name + "ffn.b2"]))

    def _split_heads(self, x: Tensor) -> Tensor:
        # [b, n, d] -> [b, heads, n, d_head]
        b, n, _ = x.shape
        x = T.reshape(x, (b, n, self._config.n_heads, self._config.d_head))
        return T.transpose(x, (0, 2, 1, 3))

    def _merge_heads(self, x: Tensor) -> Tensor:
        b, _, n, _ = x.shape
        return T.reshape(T.transpose(x, (0, 2, 1, 3)), (b, n, self._config.d_model))

    def __repr__(self) -> str:
        return f"FrozenModel({self._config}, frozen={self._frozen})"


def _causal_mask(n: int, l: int) -> np.ndarray:
    """
    Additive attention mask of shape [n, l + n]: prefix columns are always open, and real
    position i may attend to real positions up to i.
    """
    mask = np.zeros((n, l + n))
    mask[:, l:][np.triu_indices(n, k=1)] = -np.inf
    return mask
