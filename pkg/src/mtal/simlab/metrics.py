"""Task metrics and paired significance testing."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats

from ..errors import ValidationError

SIGNIFICANCE_LEVEL = 0.05


def _aligned(pred, gold):
    pred = np.asarray(pred)
    gold = np.asarray(gold)
    if pred.shape != gold.shape:
        raise ValidationError(f"predictions {pred.shape} and gold {gold.shape} are misaligned")
    return pred, gold


def f1_counts(pred, gold, null_label: int = 0) -> tuple[int, int, int]:
    """Token-level (TP, FP, FN) over non-null labels."""
    pred, gold = _aligned(pred, gold)
    hit = pred == gold
    tp = int(np.sum(hit & (gold != null_label)))
    fp = int(np.sum(~hit & (pred != null_label)))
    fn = int(np.sum(~hit & (gold != null_label)))
    return tp, fp, fn


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2 * tp / denom


def micro_f1(pred, gold, null_label: int = 0) -> float:
    return f1_from_counts(*f1_counts(pred, gold, null_label))


def macro_f1(pred, gold, null_label: int = 0) -> float:
    """Unweighted mean F1 over non-null labels seen in gold or predictions."""
    pred, gold = _aligned(pred, gold)
    labels = sorted(set(np.unique(gold)) | set(np.unique(pred)))
    labels = [lab for lab in labels if lab != null_label]
    if not labels:
        return 1.0
    scores = []
    for lab in labels:
        tp = int(np.sum((pred == lab) & (gold == lab)))
        fp = int(np.sum((pred == lab) & (gold != lab)))
        fn = int(np.sum((pred != lab) & (gold == lab)))
        scores.append(f1_from_counts(tp, fp, fn))
    return float(np.mean(scores))


def accuracy(pred, gold) -> float:
    pred, gold = _aligned(pred, gold)
    if gold.size == 0:
        raise ValidationError("accuracy of an empty set")
    return float(np.mean(pred == gold))


def evaluate(pred, gold, kind: str = "token", average: str = "micro", null_label: int = 0) -> float:
    """F1 over non-null labels for token tasks, accuracy for sentence tasks."""
    if kind == "sentence":
        return accuracy(pred, gold)
    if kind != "token":
        raise ValidationError(f"unknown task kind {kind!r}")
    if average == "micro":
        return micro_f1(pred, gold, null_label)
    if average == "macro":
        return macro_f1(pred, gold, null_label)
    raise ValidationError(f"unknown average {average!r}")


def geometric_mean(scores) -> float:
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValidationError("geometric mean of nothing")
    if scores.min() <= 0:
        return 0.0
    return float(np.exp(np.log(scores).mean()))


def paired_t_test(scores_a, scores_b) -> tuple[float, float]:
    """Two-sided paired t-test; returns ``(t, p)``.

    Zero variance in the differences gives ``p = 0`` when the mean
    difference is nonzero and ``p = 1`` otherwise (``t`` is then +/-inf or 0).
    """
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("paired samples must be equal-length vectors")
    if a.size < 2:
        raise ValidationError("paired t-test needs at least two pairs")
    diff = a - b
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0 or not math.isfinite(sd):
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(diff.size))
    p = 2.0 * float(stats.t.sf(abs(t), df=diff.size - 1))
    return t, min(p, 1.0)
