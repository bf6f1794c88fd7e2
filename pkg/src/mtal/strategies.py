"""Confidence aggregation, least-confident ranking, random baselines.

Selection is always "least confident first". Ties are broken by ascending
example id so every strategy is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._random import make_rng
from .errors import ValidationError

ENTROPY = "entropy-confidence"
AGREEMENT = "dropout-agreement"
SCORE_KINDS = (ENTROPY, AGREEMENT)


@dataclass(frozen=True, eq=False)
class ConfidenceMatrix:
    """An ``n x t`` grid of per-task confidences for ``n`` unlabeled examples."""

    ids: tuple
    scores: np.ndarray
    kind: str = ENTROPY

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        scores = np.array(self.scores, dtype=float, copy=True)
        if scores.ndim == 1:
            scores = scores[:, None]
        if scores.ndim != 2 or scores.shape[1] < 1:
            raise ValidationError("scores must be an n x t matrix with t >= 1")
        if scores.shape[0] != len(ids):
            raise ValidationError(f"{len(ids)} ids for {scores.shape[0]} score rows")
        if len(set(ids)) != len(ids):
            raise ValidationError("example ids must be unique")
        if scores.size and (not np.all(np.isfinite(scores)) or scores.min() < 0 or scores.max() > 1):
            raise ValidationError("confidence scores must lie in [0, 1]")
        if self.kind not in SCORE_KINDS:
            raise ValidationError(f"unknown score kind {self.kind!r}")
        scores.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_scores(cls, scores, ids=None, kind: str = ENTROPY) -> "ConfidenceMatrix":
        scores = np.asarray(scores, dtype=float)
        if ids is None:
            ids = range(scores.shape[0])
        return cls(tuple(ids), scores, kind)

    @property
    def n_examples(self) -> int:
        return self.scores.shape[0]

    @property
    def n_tasks(self) -> int:
        return self.scores.shape[1]

    def column(self, task: int) -> np.ndarray:
        if not 0 <= task < self.n_tasks:
            raise ValidationError(f"task {task} outside [0, {self.n_tasks})")
        return self.scores[:, task]

    def __eq__(self, other):
        if not isinstance(other, ConfidenceMatrix):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.kind == other.kind
            and self.scores.shape == other.scores.shape
            and bool(np.array_equal(self.scores, other.scores))
        )


@dataclass(frozen=True)
class AggregationScheme:
    """How per-task confidences collapse into one score per example.

    ``name`` is one of AVG, AVGDA, MAX, MIN, WEIGHTED_AVG; only the latter
    uses ``weights``.
    """

    name: str
    weights: tuple | None = None

    NAMES = ("AVG", "AVGDA", "MAX", "MIN", "WEIGHTED_AVG")

    def __post_init__(self):
        if self.name not in self.NAMES:
            raise ValidationError(f"unknown aggregation {self.name!r}")
        if self.name == "WEIGHTED_AVG":
            if self.weights is None:
                raise ValidationError("WEIGHTED_AVG needs weights")
            w = np.asarray(self.weights, dtype=float)
            if w.min() < 0 or abs(w.sum() - 1.0) > 1e-9:
                raise ValidationError("weights must be non-negative and sum to 1")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @classmethod
    def weighted(cls, weights) -> "AggregationScheme":
        return cls("WEIGHTED_AVG", tuple(weights))

    @classmethod
    def beta(cls, beta: float) -> "AggregationScheme":
        """Two-task weighting ``beta * task_1 + (1 - beta) * task_0``."""
        return cls.weighted(beta_weights(beta))


def beta_weights(beta: float) -> tuple[float, float]:
    """Per-task weights ``(1 - beta, beta)``; task 1 is the dependent task."""
    if not 0.0 <= beta <= 1.0:
        raise ValidationError(f"beta={beta} outside [0, 1]")
    return (1.0 - beta, float(beta))


@dataclass
class SelectionResult:
    """Ordered selection plus which tasks each selected example is annotated on."""

    ids: list
    flags: np.ndarray = None
    strategy: str = ""
    total_cost: float | None = None
    n_tasks: int = 1
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ids = [int(i) for i in self.ids]
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("selection contains duplicate ids")
        if self.flags is None:
            self.flags = np.ones((len(self.ids), self.n_tasks), dtype=bool)
        else:
            self.flags = np.asarray(self.flags, dtype=bool).reshape(len(self.ids), -1)
            self.n_tasks = self.flags.shape[1]

    def __len__(self):
        return len(self.ids)

    def annotation(self, example_id: int) -> tuple:
        return tuple(bool(f) for f in self.flags[self.ids.index(example_id)])


def aggregate_confidences(cm: ConfidenceMatrix, scheme: AggregationScheme) -> np.ndarray:
    scores = cm.scores
    if scheme.name == "AVGDA" and cm.kind != AGREEMENT:
        raise ValidationError("AVGDA aggregates dropout-agreement scores")
    if scheme.name == "AVG" and cm.kind != ENTROPY:
        raise ValidationError("AVG aggregates entropy-based confidence scores")
    if scheme.name in ("AVG", "AVGDA"):
        return scores.mean(axis=1)
    if scheme.name == "MAX":
        return scores.max(axis=1)
    if scheme.name == "MIN":
        return scores.min(axis=1)
    weights = np.asarray(scheme.weights, dtype=float)
    if weights.size != cm.n_tasks:
        raise ValidationError(f"{weights.size} weights for {cm.n_tasks} tasks")
    # plain loop keeps one-hot weights bit-exact (no 0 * x + 1 * y rounding)
    out = np.zeros(cm.n_examples)
    for task, w in enumerate(weights):
        if w:
            out = out + w * scores[:, task]
    return out


def least_confident_order(scores, ids=None) -> list:
    """Ids sorted by ascending score, ties by ascending id."""
    scores = np.asarray(scores, dtype=float)
    ids = np.arange(scores.size) if ids is None else np.asarray(ids)
    order = np.lexsort((ids, scores))
    return [int(i) for i in ids[order]]


def rank_by_confidence(scores, n: int, ids=None, strategy: str = "") -> SelectionResult:
    if n < 0:
        raise ValidationError("selection size must be non-negative")
    order = least_confident_order(scores, ids)
    return SelectionResult(order[:n], strategy=strategy)


def random_select(pool_ids: Iterable[int], n: int, seed: int, strategy: str = "random") -> SelectionResult:
    """Uniform sample without replacement from ``pool_ids`` using PCG64(seed)."""
    if n < 0:
        raise ValidationError("selection size must be non-negative")
    pool = np.asarray(sorted(int(i) for i in pool_ids), dtype=np.int64)
    n = min(n, pool.size)
    picked = make_rng(seed).choice(pool.size, size=n, replace=False)
    return SelectionResult([int(i) for i in pool[picked]], strategy=strategy)


def selection_overlap(a: SelectionResult | Sequence[int], b: SelectionResult | Sequence[int]) -> float:
    """Percentage of ``a``'s selected ids that ``b`` also selected."""
    ids_a = set(a.ids if isinstance(a, SelectionResult) else a)
    ids_b = set(b.ids if isinstance(b, SelectionResult) else b)
    if not ids_a or len(ids_a) != len(ids_b):
        raise ValidationError(f"selections must be equal-sized and non-empty ({len(ids_a)} vs {len(ids_b)})")
    return 100.0 * len(ids_a & ids_b) / len(ids_a)
