"""Per-example confidence and calibration quantities.

Confidence scores live in [0, 1]; lower values mark examples the model is
less sure about. Entropies use the natural log, and ``0 * log 0`` is taken
as 0. Probability rows are rejected (never renormalized) when they drift
more than ``ROW_TOL`` from summing to one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import log_softmax, softmax

from .errors import ValidationError

ROW_TOL = 1e-9
DEFAULT_TEMPERATURE_GRID = np.geomspace(0.05, 20.0, 200)


@dataclass(frozen=True)
class CalibrationSample:
    conf: float
    acc: float

    def __post_init__(self):
        for name in ("conf", "acc"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name}={value} outside [0, 1]")


def _check_distribution(probs: np.ndarray) -> None:
    if probs.ndim != 2 or probs.shape[0] < 1:
        raise ValidationError("expected a non-empty 2-D probability matrix")
    if probs.shape[1] < 2:
        raise ValidationError(f"need at least 2 labels, got {probs.shape[1]}")
    if not np.all(np.isfinite(probs)):
        raise ValidationError("probabilities must be finite")
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise ValidationError("probabilities must lie in [0, 1]")
    drift = np.abs(probs.sum(axis=1) - 1.0)
    if drift.max() > ROW_TOL:
        row = int(drift.argmax())
        raise ValidationError(f"row {row} sums to {probs[row].sum()!r}, not 1")


def _plogp(probs: np.ndarray) -> np.ndarray:
    out = np.zeros_like(probs, dtype=float)
    pos = probs > 0
    out[pos] = probs[pos] * np.log(probs[pos])
    return out


def _clip_unit(values):
    return np.clip(values, 0.0, 1.0)


def token_entropy_confidence(probs) -> float:
    """One minus the length- and label-normalized entropy of a token sequence.

    ``probs`` is an ``m x s`` matrix whose row ``i`` is the predicted label
    distribution of token ``i``.
    """
    probs = np.asarray(probs, dtype=float)
    _check_distribution(probs)
    m, s = probs.shape
    entropy = -_plogp(probs).sum() / (m * np.log(s))
    return float(_clip_unit(1.0 - entropy))


def sentence_entropy_confidence(probs) -> float:
    """One minus ``H(p) / log s`` for a single class distribution."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1:
        raise ValidationError("expected a 1-D class distribution")
    return token_entropy_confidence(probs[None, :])


def token_entropy_confidences(probs, lengths) -> np.ndarray:
    """Vectorized :func:`token_entropy_confidence` over concatenated sentences.

    ``probs`` stacks the token rows of all sentences; ``lengths`` gives the
    number of rows belonging to each sentence, in order. A sentence-level
    task passes one row per sentence with ``lengths`` all ones.
    """
    probs = np.asarray(probs, dtype=float)
    lengths = np.asarray(lengths, dtype=int)
    _check_distribution(probs)
    if lengths.min(initial=1) < 1 or lengths.sum() != probs.shape[0]:
        raise ValidationError("lengths must be positive and cover every row")
    token_h = -_plogp(probs).sum(axis=1) / np.log(probs.shape[1])
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    sentence_h = np.add.reduceat(token_h, starts) / lengths
    return _clip_unit(1.0 - sentence_h)


def _pair_agreement(preds: np.ndarray) -> np.ndarray:
    # ordered pairs j != j' agreeing at each column: sum_c n_c (n_c - 1)
    k = preds.shape[0]
    agree = np.zeros(preds.shape[1], dtype=float)
    for label in np.unique(preds):
        counts = (preds == label).sum(axis=0)
        agree += counts * (counts - 1)
    return agree / (k * (k - 1))


def _check_ensemble(preds: np.ndarray) -> None:
    if preds.ndim != 2:
        raise ValidationError("ensemble must be k x m (one row per model pass)")
    if preds.shape[0] < 2:
        raise ValidationError(f"need at least 2 model passes, got {preds.shape[0]}")
    if preds.shape[1] < 1:
        raise ValidationError("ensemble has no token positions")


def dropout_agreement(ensemble) -> float:
    """Average pairwise token-level agreement across ``k`` stochastic passes.

    A sentence-level task is the ``m = 1`` case: pass a ``k x 1`` array.
    """
    try:
        preds = np.asarray(ensemble)
    except ValueError as exc:  # ragged rows
        raise ValidationError("all ensemble rows must have the same length") from exc
    _check_ensemble(preds)
    return float(_pair_agreement(preds).mean())


def dropout_agreements(ensemble, lengths) -> np.ndarray:
    """Vectorized :func:`dropout_agreement`; columns are concatenated tokens."""
    preds = np.asarray(ensemble)
    lengths = np.asarray(lengths, dtype=int)
    _check_ensemble(preds)
    if lengths.min(initial=1) < 1 or lengths.sum() != preds.shape[1]:
        raise ValidationError("lengths must be positive and cover every column")
    per_token = _pair_agreement(preds)
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    return np.add.reduceat(per_token, starts) / lengths


def label_smoothing_targets(one_hot_index: int, s: int, alpha: float) -> np.ndarray:
    """Smoothed target: gold gets ``1 - alpha + alpha/s``, the rest ``alpha/s``."""
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha={alpha} outside [0, 1)")
    if s < 2:
        raise ValidationError(f"need at least 2 labels, got {s}")
    if not 0 <= one_hot_index < s:
        raise ValidationError(f"label {one_hot_index} outside [0, {s})")
    target = np.full(s, alpha / s)
    target[one_hot_index] += 1.0 - alpha
    return target


def smoothed_target_matrix(labels, s: int, alpha: float) -> np.ndarray:
    """Row-stacked :func:`label_smoothing_targets` for an array of gold labels."""
    labels = np.asarray(labels, dtype=int)
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha={alpha} outside [0, 1)")
    if labels.size and (labels.min() < 0 or labels.max() >= s):
        raise ValidationError("gold label outside the label range")
    target = np.full((labels.size, s), alpha / s)
    target[np.arange(labels.size), labels] += 1.0 - alpha
    return target


def temperature_nll(logits, gold, temperature: float) -> float:
    logits = np.asarray(logits, dtype=float)
    gold = np.asarray(gold, dtype=int)
    logp = log_softmax(logits / temperature, axis=1)
    return float(-logp[np.arange(gold.size), gold].mean())


def fit_and_apply_temperature(logits, gold_labels, grid: Sequence[float] | None = None):
    """Grid-search the temperature minimizing mean NLL, then rescale.

    Returns ``(T, probs)`` where ``probs = softmax(logits / T)``. Exact NLL
    ties go to the candidate closest to ``T = 1`` in log space, then to the
    smaller temperature.
    """
    logits = np.asarray(logits, dtype=float)
    gold = np.asarray(gold_labels, dtype=int)
    if logits.ndim != 2 or logits.shape[0] == 0 or gold.size == 0:
        raise ValidationError("temperature fitting needs non-empty logits and labels")
    if gold.shape != (logits.shape[0],):
        raise ValidationError("one gold label per logit row is required")
    if gold.min() < 0 or gold.max() >= logits.shape[1]:
        raise ValidationError("gold label outside the label range")
    grid = DEFAULT_TEMPERATURE_GRID if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValidationError("temperature grid must be non-empty and positive")
    nll = np.array([temperature_nll(logits, gold, t) for t in grid])
    best = nll.min()
    candidates = [t for t, v in zip(grid, nll) if v <= best + 1e-12 * max(1.0, abs(best))]
    temperature = min(candidates, key=lambda t: (abs(np.log(t)), t))
    return float(temperature), softmax(logits / temperature, axis=1)


def overconfidence_error(samples) -> float:
    """Mean of ``conf * max(conf - acc, 0)`` over calibration samples.

    Accepts :class:`CalibrationSample` objects or ``(conf, acc)`` pairs.
    """
    samples = list(samples)
    if not samples:
        raise ValidationError("overconfidence error of an empty sample list")
    pairs = [
        (s.conf, s.acc) if isinstance(s, CalibrationSample) else tuple(s)
        for s in samples
    ]
    conf, acc = (np.asarray(col, dtype=float) for col in zip(*pairs))
    if conf.min() < 0 or conf.max() > 1 or acc.min() < 0 or acc.max() > 1:
        raise ValidationError("conf and acc must lie in [0, 1]")
    return float(np.mean(conf * np.maximum(conf - acc, 0.0)))


def sentence_accuracy(pred_labels, gold_labels) -> float:
    pred = np.asarray(pred_labels)
    gold = np.asarray(gold_labels)
    if pred.shape != gold.shape:
        raise ValidationError(f"length mismatch: {pred.shape} vs {gold.shape}")
    if gold.size == 0:
        raise ValidationError("accuracy of an empty sequence")
    return float(np.mean(pred == gold))
