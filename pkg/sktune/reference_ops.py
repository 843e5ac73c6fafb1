"""
Reference implementations of the tensor primitives and the evaluation metrics.

These functions are intended for testing purposes only; they are written in the most primitive
way, with explicit Python loops over plain floats and integers, and the minimal use of any other
packages or modules. Each one mirrors an optimized counterpart in `sktune.tensor` or
`sktune.metrics`, against which it is compared in the tests.
"""


# Standard library
from typing import List, Sequence, Tuple
import math


def matmul(a: List[List[float]], b: List[List[float]]) -> List[List[float]]:
    """
    Matrix product of two nested lists, using a scalar triple loop.
    """
    n, k, p = len(a), len(b), len(b[0])
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = 0.0
            for t in range(k):
                acc += a[i][t] * b[t][j]
            row.append(acc)
        out.append(row)
    return out


def softmax(row: Sequence[float]) -> List[float]:
    """
    Softmax of a single row by the direct exp/sum formula, evaluated with `math.fsum` for an
    exactly rounded denominator.
    """
    shift = max(row)
    exps = [math.exp(x - shift) for x in row]
    total = math.fsum(exps)
    return [e / total for e in exps]


def layer_norm(row: Sequence[float], gamma: Sequence[float], beta: Sequence[float], eps: float):
    """
    Layer normalization of a single row, using a two-pass mean/variance computation.
    """
    n = len(row)
    mu = math.fsum(row) / n
    var = math.fsum([(x - mu) ** 2 for x in row]) / n
    std = math.sqrt(var + eps)
    return [(x - mu) / std * g + b for x, g, b in zip(row, gamma, beta)]


def cross_entropy(logits: List[List[float]], labels: Sequence[int]) -> float:
    """
    Mean negative log-likelihood over rows, each evaluated as -log(exp(z_y) / sum(exp(z))).
    """
    losses = []
    for row, label in zip(logits, labels):
        shift = max(row)
        log_total = math.log(math.fsum([math.exp(z - shift) for z in row])) + shift
        losses.append(log_total - row[label])
    return math.fsum(losses) / len(losses)


def confusion_counts(preds: Sequence[int], labels: Sequence[int], n_classes: int):
    """
    Confusion matrix as nested lists, indexed as [label][prediction].
    """
    counts = [[0] * n_classes for _ in range(n_classes)]
    for p, y in zip(preds, labels):
        counts[y][p] += 1
    return counts


def accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    correct = 0
    for p, y in zip(preds, labels):
        if p == y:
            correct += 1
    return correct / len(labels)


def class_f1(preds: Sequence[int], labels: Sequence[int], cls: int) -> float:
    """
    F1-score of a single class, by counting true/false positives and false negatives.
    """
    tp = fp = fn = 0
    for p, y in zip(preds, labels):
        if p == cls and y == cls:
            tp += 1
        elif p == cls:
            fp += 1
        elif y == cls:
            fn += 1
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def macro_f1(preds: Sequence[int], labels: Sequence[int], n_classes: int) -> float:
    scores = [class_f1(preds, labels, c) for c in range(n_classes)]
    total = 0.0
    for score in scores:
        total += score
    return total / n_classes


def binary_counts(preds: Sequence[int], labels: Sequence[int]) -> Tuple[int, int, int, int]:
    tp = tn = fp = fn = 0
    for p, y in zip(preds, labels):
        if p == 1 and y == 1:
            tp += 1
        elif p == 0 and y == 0:
            tn += 1
        elif p == 1:
            fp += 1
        else:
            fn += 1
    return tp, tn, fp, fn


def mcc(preds: Sequence[int], labels: Sequence[int]) -> float:
    """
    Matthews correlation coefficient from the direct formula. Numerator and the product under
    the square root are exact (arbitrary-precision) integers.
    """
    tp, tn, fp, fn = binary_counts(preds, labels)
    numerator = tp * tn - fp * fn
    product = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if product == 0:
        return 0.0
    return numerator / math.sqrt(product)


def linear_scan_first_below(losses: Sequence[float], threshold: float):
    for i in range(len(losses)):
        if losses[i] < threshold:
            return i
    return None
