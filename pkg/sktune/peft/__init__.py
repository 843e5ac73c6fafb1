"""
Fine-tuning methods over a frozen model, and the factory `create_method` selecting one by its
command-line name.
"""

# Standard library
from typing import Optional, Sequence
import logging

# Self
from ..model import FrozenModel
from ..data import param_data
from .adapters import (
    Component,
    AdapterF,
    AdapterG,
    Mlp,
    VirtualTokens,
    LowRankDeltas,
    TaskHead,
)
from .method_superclass import PeftMethod, ParamCount
from .semantic import SKPrompt, SKPrefix
from .virtual import PromptVirtual, PrefixVirtual, PTuning
from .lora import LoRA, lora_targets
from .full_finetuning import FullFT


logger = logging.getLogger(__name__)

METHOD_KINDS = ("full", "prompt", "prefix", "ptuning", "lora2", "lora4", "sk-prompt", "sk-prefix")


def create_method(
    kind: str,
    model: FrozenModel,
    task_kind: str,
    n_classes: Optional[int] = None,
    prompt_ids: Optional[Sequence[int]] = None,
    n_virtual: int = param_data.N_VIRTUAL,
    bottleneck: int = param_data.ADAPTER_BOTTLENECK,
    adapter_layers: int = param_data.ADAPTER_LAYERS,
    seed: int = 0,
) -> PeftMethod:
    """
    Instantiate a fine-tuning method by name.

    Parameters
    ----------
    kind : str
        One of `METHOD_KINDS`.
    model : FrozenModel
        The frozen model.
    task_kind : str
        Task kind or alias.
    n_classes : int, optional
        Number of classes; defaults to the task kind's class count.
    prompt_ids : Sequence[int], optional
        Token IDs of the prompt (or prefix) text; required by 'sk-prompt' and 'sk-prefix'.
    n_virtual : int
        Number of virtual tokens of 'prompt', 'prefix' and 'ptuning'.
    bottleneck : int
        Adapter width of 'sk-prompt'.
    adapter_layers : int
        Number of adapter blocks of 'sk-prompt'.
    seed : int
        Seed of the initialization of all trainable parameters.

    Returns
    -------
    PeftMethod
    """
    if kind in ("sk-prompt", "sk-prefix") and prompt_ids is None:
        raise ValueError(f"Method {kind!r} needs a prompt text.")
    virtual = {"prompt": PromptVirtual, "prefix": PrefixVirtual, "ptuning": PTuning}
    if kind == "sk-prompt":
        method = SKPrompt(
            model, prompt_ids, task_kind, n_classes, seed, bottleneck, adapter_layers
        )
    elif kind == "sk-prefix":
        method = SKPrefix(model, prompt_ids, task_kind, n_classes, seed)
    elif kind == "full":
        method = FullFT(model, task_kind, n_classes, seed)
    elif kind in param_data.LORA_RANKS:
        method = LoRA(model, task_kind, param_data.LORA_RANKS[kind], n_classes, seed)
    elif kind in virtual:
        method = virtual[kind](model, task_kind, n_classes, seed, n_virtual)
    else:
        raise ValueError(f"Unknown method {kind!r}; choose from {', '.join(METHOD_KINDS)}.")
    logger.debug(f"Created {method.name}: {method.trainable_params().count} trainable scalars.")
    return method
