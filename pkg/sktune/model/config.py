"""
Configuration of the frozen transformer.
"""

# Standard library
from dataclasses import dataclass, asdict, fields
from typing import Any, Dict

# Self
from ..data import param_data


@dataclass(frozen=True)
class ModelConfig:
    """
    Hyperparameters of the decoder transformer.

    Attributes
    ----------
    vocab_size : int
        Number of token embeddings.
    d_model : int
        Width of the hidden states.
    n_layers : int
        Number of attention blocks.
    n_heads : int
        Number of attention heads; must divide `d_model`.
    d_ffn : int
        Width of the hidden layer of each feed-forward network.
    max_seq : int
        Number of positional embeddings, i.e. the longest sequence the model accepts.
    ln_eps : float
        Constant added to the variance in every layer normalization.
    seed : int
        Seed of the parameter initialization (unsigned 64-bit).
    """
    vocab_size: int = param_data.REFERENCE_MODEL["vocab_size"]
    d_model: int = param_data.REFERENCE_MODEL["d_model"]
    n_layers: int = param_data.REFERENCE_MODEL["n_layers"]
    n_heads: int = param_data.REFERENCE_MODEL["n_heads"]
    d_ffn: int = param_data.REFERENCE_MODEL["d_ffn"]
    max_seq: int = param_data.REFERENCE_MODEL["max_seq"]
    ln_eps: float = param_data.REFERENCE_MODEL["ln_eps"]
    seed: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "d_model", "n_layers", "n_heads", "d_ffn", "max_seq"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValueError(f"`{name}` should be a positive integer, but is {value!r}.")
        if self.vocab_size <= len(param_data.RESERVED_TOKENS):
            raise ValueError("`vocab_size` should exceed the number of reserved tokens.")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"`d_model` ({self.d_model}) should be divisible by `n_heads` ({self.n_heads})."
            )
        if self.ln_eps <= 0:
            raise ValueError(f"`ln_eps` should be positive, but is {self.ln_eps}.")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"`seed` should be an unsigned 64-bit integer, but is {self.seed}.")
        return

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ModelConfig":
        names = {field.name for field in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"Unknown configuration fields: {sorted(unknown)}.")
        kwargs = {
            name: (float(value) if name == "ln_eps" else int(value))
            for name, value in values.items()
        }
        return cls(**kwargs)
