"""
Test functions for the evaluation metrics and emitters in `sktune.metrics`, compared against
the counting implementations in `sktune.reference_ops`.
"""

# Standard library
import json

# 3rd-party packages
import numpy as np
import pandas as pd
import pytest

# Self
from sktune import metrics
from sktune import reference_ops as ref
from sktune.train import TrainRun
from sktune.exceptions import (
    LengthMismatchError,
    EmptyInputError,
    LabelOutOfRangeError,
    NonBinaryError,
    IndexOutOfRangeError,
    ShapeMismatchError,
)


# Set up random number generator with seed to make sure testing results are consistent
random_gen = np.random.RandomState(1111)


def test_binary_oracles():
    """
    Test function for `sktune.metrics.accuracy`, `sktune.metrics.f1` and `sktune.metrics.mcc` on
    random binary predictions; results must be identical to the reference counts.
    """
    for _ in range(5):
        preds = random_gen.randint(0, 2, size=1000).tolist()
        labels = random_gen.randint(0, 2, size=1000).tolist()
        assert metrics.accuracy(preds, labels) == ref.accuracy(preds, labels)
        assert metrics.f1(preds, labels) == ref.class_f1(preds, labels, 1)
        assert metrics.mcc(preds, labels) == ref.mcc(preds, labels)
        assert np.array_equal(
            metrics.confusion_matrix(preds, labels, 2), ref.confusion_counts(preds, labels, 2)
        )
    return


def test_macro_oracle():
    for _ in range(5):
        preds = random_gen.randint(0, 3, size=1000).tolist()
        labels = random_gen.randint(0, 3, size=1000).tolist()
        assert metrics.f1(preds, labels, "macro", 3) == ref.macro_f1(preds, labels, 3)
        assert metrics.accuracy(preds, labels) == ref.accuracy(preds, labels)
    return


def test_examples():
    """
    Test function for the metrics on hand-computed examples.
    """
    preds, labels = [1, 0, 1, 1], [1, 0, 0, 1]
    assert metrics.accuracy(preds, labels) == 0.75
    assert np.isclose(metrics.f1(preds, labels), 0.8, rtol=0, atol=1e-15)
    assert np.isclose(metrics.mcc(preds, labels), 2 / np.sqrt(6), rtol=0, atol=1e-15)
    # A constant predictor has no correlation, and no positives give an F1-score of 0
    assert metrics.mcc([1, 1, 1], [0, 1, 1]) == 0
    assert metrics.f1([0, 0], [0, 0]) == 0
    assert metrics.f1([0, 0], [0, 0], "macro", 2) == 0.5
    return


def test_permutation_invariance():
    preds = random_gen.randint(0, 2, size=200)
    labels = random_gen.randint(0, 2, size=200)
    order = random_gen.permutation(200)
    for fn in (metrics.accuracy, metrics.f1, metrics.mcc):
        assert np.isclose(fn(preds, labels), fn(preds[order], labels[order]), rtol=0, atol=1e-15)
    return


def test_report():
    report = metrics.report([0, 1, 2, 2], [0, 1, 1, 2], 3)
    assert report.averaging == "macro" and report.mcc is None and report.n == 4
    assert report.confusion.tolist() == [[1, 0, 0], [0, 1, 1], [0, 0, 1]]
    binary = metrics.report([1, 0, 1, 1], [1, 0, 0, 1], 2)
    assert binary.averaging == "binary_pos"
    assert binary == metrics.report([1, 0, 1, 1], [1, 0, 0, 1], 2)
    assert json.loads(json.dumps(binary.to_dict()))["confusion"] == [[1, 1], [0, 2]]
    return


def test_errors():
    with pytest.raises(LengthMismatchError):
        metrics.accuracy([0, 1], [0])
    with pytest.raises(EmptyInputError):
        metrics.f1([], [])
    with pytest.raises(NonBinaryError):
        metrics.mcc([0, 2], [0, 1])
    with pytest.raises(LabelOutOfRangeError):
        metrics.confusion_matrix([0, 3], [0, 1], 3)
    with pytest.raises(ValueError):
        metrics.f1([0], [0], averaging="micro")
    return


def test_emit_run_csv(tmp_path):
    """
    Test function for `sktune.metrics.emit_run_csv` and the summary written next to it.
    """
    run = TrainRun(
        method="sk-prompt",
        task_kind="sequence",
        seed=0,
        losses=[0.5, 0.25, 0.1234567890123456789],
        convergence_step=1,
        metrics=metrics.report([1, 0], [1, 1], 2),
        trainable_pct=1.7,
    )
    path = tmp_path / "run.csv"
    metrics.emit_run_csv(run, path)
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[:3] == ["step,loss", "0,0.5", "1,0.25"]
    assert len(lines) == 5 and lines[-1] == ""
    trace = pd.read_csv(path, float_precision="round_trip")
    assert trace["step"].tolist() == [0, 1, 2]
    assert trace["loss"].tolist() == run.losses
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary == {
        "method": "sk-prompt",
        "params_pct": 1.7,
        "convergence_step": 1,
        "accuracy": 0.5,
        "f1": 2 / 3,
        "mcc": 0.0,
    }
    return


def test_emit_attention_csv(tmp_path):
    """
    Test function for `sktune.metrics.emit_attention_csv`.
    """
    attn = random_gen.uniform(size=(2, 3, 2, 4))
    path = tmp_path / "attn.csv"
    frame = metrics.emit_attention_csv(attn, 1, 2, ["i", "love"], ["p", "q", "i", "love"], path)
    loaded = pd.read_csv(path, index_col="token", float_precision="round_trip")
    assert list(loaded.columns) == ["p", "q", "i", "love"]
    assert list(loaded.index) == ["i", "love"]
    assert np.array_equal(loaded.to_numpy(), attn[1, 2])
    assert np.array_equal(frame.to_numpy(), attn[1, 2])
    with pytest.raises(IndexOutOfRangeError):
        metrics.emit_attention_csv(attn, 2, 0, ["i", "love"], ["p", "q", "i", "love"], path)
    with pytest.raises(IndexOutOfRangeError):
        metrics.emit_attention_csv(attn, 0, -1, ["i", "love"], ["p", "q", "i", "love"], path)
    with pytest.raises(ShapeMismatchError):
        metrics.emit_attention_csv(attn, 0, 0, ["i"], ["p", "q", "i", "love"], path)
    return


def test_macro_relabel_invariance():
    """
    Test function for `sktune.metrics.f1` with macro averaging: renaming the classes by a
    bijection leaves the score unchanged.
    """
    for _ in range(100):
        preds = random_gen.randint(0, 4, size=50)
        labels = random_gen.randint(0, 4, size=50)
        mapping = random_gen.permutation(4)
        score = metrics.f1(preds, labels, "macro", 4)
        relabeled = metrics.f1(mapping[preds], mapping[labels], "macro", 4)
        assert np.isclose(score, relabeled, rtol=0, atol=1e-12)
    return
