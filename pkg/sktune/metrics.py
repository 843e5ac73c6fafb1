"""
Evaluation metrics computed from integer confusion counts, and the CSV/JSON emission of training
traces, summaries and attention maps.

F1-score conventions: binary tasks report the F1-score of the positive class (label 1);
multiclass tasks report the unweighted mean over classes ('macro'). The F1-score of a class is 0
when its precision and recall are both 0. The Matthews correlation coefficient is defined for
binary tasks only, and is 0 when any factor under its square root is 0.
"""

# Standard library
from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Optional, Sequence, Union
import json
import logging
import math

# 3rd-party packages
import numpy as np
import pandas as pd

# Self
from .tensor import Tensor
from .exceptions import (
    EmptyInputError,
    LengthMismatchError,
    LabelOutOfRangeError,
    NonBinaryError,
    IndexOutOfRangeError,
    ShapeMismatchError,
)

if TYPE_CHECKING:
    from .train import TrainRun


__all__ = [
    "MetricsReport",
    "confusion_matrix",
    "accuracy",
    "f1",
    "mcc",
    "report",
    "summary",
    "emit_run_csv",
    "write_summary_json",
    "emit_attention_csv",
]


logger = logging.getLogger(__name__)

AVERAGINGS = ("binary_pos", "macro")
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class MetricsReport:
    """
    Evaluation results of a set of predictions.

    Attributes
    ----------
    accuracy : float
    f1 : float
        Positive-class F1-score for binary tasks, macro F1-score otherwise.
    mcc : float or None
        Matthews correlation coefficient; None for multiclass tasks.
    confusion : numpy.ndarray
        Counts of shape [C, C], indexed as [label, prediction].
    n : int
        Number of predictions.
    averaging : str
        'binary_pos' or 'macro'.
    """
    accuracy: float
    f1: float
    mcc: Optional[float]
    confusion: np.ndarray
    n: int
    averaging: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "mcc": self.mcc,
            "confusion": self.confusion.tolist(),
            "n": self.n,
            "averaging": self.averaging,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricsReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _as_label_arrays(preds, labels):
    preds = np.asarray(preds, dtype=np.int64).ravel()
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if preds.size != labels.size:
        raise LengthMismatchError(
            f"{preds.size} predictions were given for {labels.size} labels."
        )
    if labels.size == 0:
        raise EmptyInputError("Metrics need at least one prediction.")
    return preds, labels


def confusion_matrix(
    preds: Sequence[int], labels: Sequence[int], n_classes: Optional[int] = None
) -> np.ndarray:
    """
    Confusion counts indexed as [label, prediction].

    Parameters
    ----------
    preds, labels : array_like of int
        Predicted and true classes, of equal length ≥ 1.
    n_classes : int, optional
        Number of classes; inferred as the largest class index plus one (at least 2) when
        not given.

    Returns
    -------
    numpy.ndarray
        Integer matrix of shape [n_classes, n_classes].

    Raises
    ------
    LengthMismatchError, EmptyInputError, LabelOutOfRangeError
    """
    preds, labels = _as_label_arrays(preds, labels)
    if n_classes is None:
        n_classes = max(2, int(max(preds.max(), labels.max())) + 1)
    if min(preds.min(), labels.min()) < 0 or max(preds.max(), labels.max()) >= n_classes:
        raise LabelOutOfRangeError(f"Classes should lie in [0, {n_classes}).")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return counts


def accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    """
    Ratio of correct predictions.
    """
    return _accuracy(confusion_matrix(preds, labels))


def _accuracy(counts: np.ndarray) -> float:
    return int(np.trace(counts)) / int(counts.sum())


def _class_f1(counts: np.ndarray, cls: int) -> float:
    tp = int(counts[cls, cls])
    fp = int(counts[:, cls].sum()) - tp
    fn = int(counts[cls, :].sum()) - tp
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _f1(counts: np.ndarray, averaging: str) -> float:
    if averaging == "binary_pos":
        return _class_f1(counts, 1)
    total = 0.0
    for cls in range(counts.shape[0]):
        total += _class_f1(counts, cls)
    return total / counts.shape[0]


def f1(
    preds: Sequence[int],
    labels: Sequence[int],
    averaging: str = "binary_pos",
    n_classes: Optional[int] = None,
) -> float:
    """
    F1-score, the harmonic mean of precision and recall.

    Parameters
    ----------
    preds, labels : array_like of int
    averaging : str
        'binary_pos' for the F1-score of class 1, or 'macro' for the unweighted mean of the
        F1-scores of all classes.
    n_classes : int, optional
        Number of classes entering the macro average; inferred when not given.

    Returns
    -------
    float

    Raises
    ------
    LengthMismatchError, EmptyInputError
    """
    if averaging not in AVERAGINGS:
        raise ValueError(f"`averaging` should be one of {AVERAGINGS}, but is {averaging!r}.")
    return _f1(confusion_matrix(preds, labels, n_classes), averaging)


def _mcc(counts: np.ndarray) -> float:
    tn, fp = int(counts[0, 0]), int(counts[0, 1])
    fn, tp = int(counts[1, 0]), int(counts[1, 1])
    # Python integers keep the product exact
    product = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if product == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(product)


def mcc(preds: Sequence[int], labels: Sequence[int]) -> float:
    """
    Matthews correlation coefficient of binary predictions.

    Raises
    ------
    NonBinaryError, LengthMismatchError, EmptyInputError
    """
    preds_arr, labels_arr = _as_label_arrays(preds, labels)
    if not (np.isin(preds_arr, (0, 1)).all() and np.isin(labels_arr, (0, 1)).all()):
        raise NonBinaryError("The Matthews correlation coefficient needs binary classes.")
    return _mcc(confusion_matrix(preds_arr, labels_arr, 2))


def report(preds: Sequence[int], labels: Sequence[int], n_classes: int) -> MetricsReport:
    """
    Accuracy, F1-score and (for binary tasks) Matthews correlation of a set of predictions.
    """
    counts = confusion_matrix(preds, labels, n_classes)
    binary = n_classes == 2
    averaging = "binary_pos" if binary else "macro"
    return MetricsReport(
        accuracy=_accuracy(counts),
        f1=_f1(counts, averaging),
        mcc=_mcc(counts) if binary else None,
        confusion=counts,
        n=int(counts.sum()),
        averaging=averaging,
    )


def emit_run_csv(run: TrainRun, path: Union[str, Path]) -> None:
    """
    Write the loss trace of a run as `step,loss` rows (with header), and its summary as
    'summary.json' next to it.
    """
    path = Path(path)
    trace = pd.DataFrame(
        {"step": np.arange(len(run.losses), dtype=np.int64), "loss": np.asarray(run.losses)}
    )
    trace.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    write_summary_json(run, path.parent / "summary.json")
    logger.debug(f"Wrote loss trace of {len(run.losses)} steps to {path}.")
    return


def summary(run: TrainRun) -> Dict[str, Any]:
    metrics = run.metrics
    return {
        "method": run.method,
        "params_pct": run.trainable_pct,
        "convergence_step": run.convergence_step,
        "accuracy": None if metrics is None else metrics.accuracy,
        "f1": None if metrics is None else metrics.f1,
        "mcc": None if metrics is None else metrics.mcc,
    }


def write_summary_json(run: TrainRun, path: Union[str, Path]) -> None:
    """
    Write {method, params_pct, convergence_step, accuracy, f1, mcc} of a run as JSON.
    """
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary(run), f, indent=2)
        f.write("\n")
    return


def emit_attention_csv(
    attn: Union[Tensor, np.ndarray],
    layer: int,
    head: int,
    row_tokens: Sequence[str],
    col_tokens: Sequence[str],
    path: Union[str, Path],
) -> pd.DataFrame:
    """
    Write the attention map of one layer and head as a labeled matrix: the header holds the
    column (key) tokens, and each row starts with its (query) token.

    Parameters
    ----------
    attn : Tensor or numpy.ndarray
        Attention maps of shape [n_layers, n_heads, n, l + n].
    layer, head : int
        Indices of the exported map.
    row_tokens : Sequence[str]
        One label per query position (n).
    col_tokens : Sequence[str]
        One label per key position (l + n).
    path : str or pathlib.Path

    Returns
    -------
    pandas.DataFrame
        The exported matrix.

    Raises
    ------
    IndexOutOfRangeError, ShapeMismatchError
    """
    maps = attn.data if isinstance(attn, Tensor) else np.asarray(attn, dtype=np.float64)
    if maps.ndim != 4:
        raise ShapeMismatchError(f"Attention maps should be 4-dimensional, but have {maps.shape}.")
    n_layers, n_heads, n_rows, n_cols = maps.shape
    if not 0 <= layer < n_layers:
        raise IndexOutOfRangeError(f"Layer {layer} is not in [0, {n_layers}).")
    if not 0 <= head < n_heads:
        raise IndexOutOfRangeError(f"Head {head} is not in [0, {n_heads}).")
    if len(row_tokens) != n_rows or len(col_tokens) != n_cols:
        raise ShapeMismatchError(
            f"Expected {n_rows} row and {n_cols} column labels, but got {len(row_tokens)} and "
            f"{len(col_tokens)}."
        )
    frame = pd.DataFrame(maps[layer, head], index=list(row_tokens), columns=list(col_tokens))
    frame.index.name = "token"
    frame.to_csv(path, float_format=FLOAT_FORMAT, lineterminator="\n")
    return frame
