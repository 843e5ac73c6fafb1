"""
Deterministic training and evaluation of fine-tuning methods.
"""

# Standard library
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence
import json
import logging
import math
import time

# 3rd-party packages
import numpy as np

# Self
from . import tensor as T
from .data import param_data, Example, iter_batches
from .exceptions import EmptyInputError, NonFiniteError
from .metrics import MetricsReport, report
from .model import FrozenModel
from .optim import OptimState, adamw_step
from .peft import PeftMethod


__all__ = [
    "HyperParams",
    "TrainRun",
    "convergence_step",
    "train",
    "evaluate",
    "efficiency_report",
]


logger = logging.getLogger(__name__)

BYTES_PER_SCALAR = np.dtype(np.float64).itemsize


@dataclass(frozen=True)
class HyperParams:
    """
    Training hyperparameters.

    Attributes
    ----------
    lr : float
        Learning rate of AdamW; 0 turns the optimizer into a no-op.
    epochs : int
        Number of passes over the training set.
    batch_size : int
    seed : int
        Seed of the mini-batch shuffling.
    loss_threshold : float
        Training loss below which a run counts as converged.
    weight_decay : float
    log_every : int
        Interval (in steps) of progress logging; 0 disables it.
    """
    lr: float
    epochs: int
    batch_size: int = param_data.BATCH_SIZE
    seed: int = 0
    loss_threshold: float = param_data.LOSS_THRESHOLD
    weight_decay: float = param_data.WEIGHT_DECAY
    log_every: int = 10

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError(f"Learning rate should be non-negative, but is {self.lr}.")
        if self.epochs < 0:
            raise ValueError(f"Number of epochs should be non-negative, but is {self.epochs}.")
        if self.batch_size < 1:
            raise ValueError(f"Batch size should be positive, but is {self.batch_size}.")
        if not self.loss_threshold > 0:
            raise ValueError(f"Loss threshold should be positive, but is {self.loss_threshold}.")
        return

    @classmethod
    def for_task(cls, task_kind: str, **overrides) -> HyperParams:
        """Default learning rate and number of epochs of a task kind."""
        defaults = {
            "lr": param_data.LEARNING_RATES[task_kind],
            "epochs": param_data.EPOCHS[task_kind],
        }
        defaults.update(overrides)
        return cls(**defaults)


@dataclass
class TrainRun:
    """
    Record of a training run.
    """
    method: str
    task_kind: str
    seed: int
    losses: List[float] = field(default_factory=list)
    convergence_step: Optional[int] = None
    metrics: Optional[MetricsReport] = None
    trainable_count: int = 0
    trainable_pct: float = 0.0
    wall_time: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.losses)

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None

    def to_dict(self) -> Dict[str, Any]:
        """All fields except the wall time, which differs between identical runs."""
        return {
            "method": self.method,
            "task_kind": self.task_kind,
            "seed": self.seed,
            "steps": self.steps,
            "losses": list(self.losses),
            "final_loss": self.final_loss,
            "convergence_step": self.convergence_step,
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "trainable_count": self.trainable_count,
            "trainable_pct": self.trainable_pct,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def convergence_step(losses: Sequence[float], threshold: float) -> Optional[int]:
    """
    Index of the first loss strictly below `threshold`, or None if there is none.
    """
    if not threshold > 0:
        raise ValueError(f"Threshold should be positive, but is {threshold}.")
    below = np.flatnonzero(np.asarray(losses, dtype=np.float64) < threshold)
    return int(below[0]) if below.size else None


def train(
    model: FrozenModel,
    method: PeftMethod,
    dataset: Sequence[Example],
    hp: HyperParams,
    eval_dataset: Optional[Sequence[Example]] = None,
) -> TrainRun:
    """
    Train the trainable parameters of a method by AdamW on shuffled mini-batches.

    Parameters
    ----------
    model : FrozenModel
        The frozen model the method was built on; it is never updated.
    method : PeftMethod
    dataset : Sequence[Example]
        Non-empty training set.
    hp : HyperParams
    eval_dataset : Sequence[Example], optional
        Examples evaluated after training; defaults to the training set.

    Returns
    -------
    TrainRun

    Raises
    ------
    EmptyInputError
    NonFiniteError
        When a training loss is NaN or infinite; its `step` attribute holds the step index.
    """
    if method.model is not model:
        raise ValueError("The method was built on a different model.")
    if len(dataset) == 0:
        raise EmptyInputError("The training set is empty.")
    trainable = list(method.trainable.values())
    state = OptimState(trainable, lr=hp.lr, weight_decay=hp.weight_decay)
    rng = np.random.default_rng(hp.seed)
    count = method.trainable_params()
    run = TrainRun(
        method=method.name,
        task_kind=method.task_kind,
        seed=hp.seed,
        trainable_count=count.count,
        trainable_pct=count.percentage,
    )
    logger.info(f"Training {method.name} ({count.count} trainable parameters) for {hp.epochs} "
                f"epochs on {len(dataset)} examples.")
    start = time.perf_counter()
    for epoch in range(hp.epochs):
        for batch in iter_batches(dataset, hp.batch_size, rng):
            step = len(run.losses)
            T.zero_grad(trainable)
            loss = method.loss(batch)
            value = loss.item()
            if not math.isfinite(value):
                raise NonFiniteError(f"Training loss of {method.name} is {value}", step=step)
            T.backward(loss)
            adamw_step(trainable, [p.grad for p in trainable], state)
            run.losses.append(value)
            if hp.log_every and step % hp.log_every == 0:
                logger.info(f"epoch {epoch} step {step}: loss {value:.4f}")
    T.zero_grad(trainable)
    run.wall_time = time.perf_counter() - start
    run.convergence_step = convergence_step(run.losses, hp.loss_threshold)
    run.metrics = evaluate(model, method, dataset if eval_dataset is None else eval_dataset)
    return run


def evaluate(
    model: FrozenModel,
    method: PeftMethod,
    dataset: Sequence[Example],
    batch_size: int = param_data.BATCH_SIZE,
) -> MetricsReport:
    """
    Metrics of the argmax predictions of a method over a dataset, computed without recording
    and without changing any parameter.
    """
    if method.model is not model:
        raise ValueError("The method was built on a different model.")
    preds, labels = [], []
    for batch in iter_batches(dataset, batch_size):
        batch_preds, batch_labels = method.predict(batch)
        preds.append(batch_preds)
        labels.append(batch_labels)
    if not preds:
        raise EmptyInputError("The evaluation set is empty.")
    return report(np.concatenate(preds), np.concatenate(labels), method.n_classes)


def efficiency_report(method: PeftMethod, run: Optional[TrainRun] = None) -> Dict[str, Any]:
    """
    Memory accounting of a method in bytes of float64 storage: frozen weights, trainable weights,
    their gradients and the two AdamW moments. With a run, also the seconds per training step.
    """
    count = method.trainable_params()
    trainable_bytes = count.count * BYTES_PER_SCALAR
    efficiency = {
        "method": method.name,
        "frozen_bytes": count.frozen_count * BYTES_PER_SCALAR,
        "trainable_bytes": trainable_bytes,
        "gradient_bytes": trainable_bytes,
        "optimizer_bytes": 2 * trainable_bytes,
    }
    efficiency["total_bytes"] = sum(
        value for key, value in efficiency.items() if key.endswith("_bytes")
    )
    if run is not None:
        efficiency["seconds_per_step"] = run.wall_time / run.steps if run.steps else None
    return efficiency
