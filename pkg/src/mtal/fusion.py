"""Rank-based multi-task selection: reciprocal rank fusion and per-task quotas."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .strategies import ConfidenceMatrix, SelectionResult, least_confident_order

DEFAULT_RRF_K = 60.0


@dataclass(frozen=True)
class TaskRanking:
    """Ids ordered least-confident first; position 0 has rank 1."""

    order: tuple
    tie_policy: str = "ascending-id"

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if len(set(order)) != len(order):
            raise ValidationError("a ranking must list every id exactly once")
        object.__setattr__(self, "order", order)

    @classmethod
    def from_scores(cls, scores, ids=None) -> "TaskRanking":
        return cls(tuple(least_confident_order(scores, ids)))

    def ranks(self) -> dict:
        return {example: pos + 1 for pos, example in enumerate(self.order)}


@dataclass(frozen=True)
class RRFParams:
    k: float = DEFAULT_RRF_K
    weights: tuple | None = None

    def __post_init__(self):
        if not self.k > 0:
            raise ValidationError(f"RRF offset k={self.k} must be positive")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if min(w) < 0:
                raise ValidationError("RRF weights must be non-negative")
            object.__setattr__(self, "weights", w)


def rrf_scores(rankings: Sequence[TaskRanking], params: RRFParams = RRFParams()) -> dict:
    """``score(x) = sum_i w_i / (k + r_i(x))`` with 1-based ranks.

    Returns a mapping id -> score; larger means selected earlier.
    """
    if not rankings:
        raise ValidationError("need at least one ranking")
    id_set = set(rankings[0].order)
    if any(set(r.order) != id_set for r in rankings[1:]):
        raise ValidationError("rankings cover different id sets")
    weights = params.weights if params.weights is not None else (1.0,) * len(rankings)
    if len(weights) != len(rankings):
        raise ValidationError(f"{len(weights)} weights for {len(rankings)} rankings")
    scores = dict.fromkeys(rankings[0].order, 0.0)
    for w, ranking in zip(weights, rankings):
        for pos, example in enumerate(ranking.order):
            scores[example] += w / (params.k + pos + 1)
    return scores


def rrf_order(scores: dict) -> list:
    """Descending RRF score, ties by ascending id."""
    return sorted(scores, key=lambda example: (-scores[example], example))


def task_rankings(cm: ConfidenceMatrix) -> list[TaskRanking]:
    return [TaskRanking.from_scores(cm.column(t), cm.ids) for t in range(cm.n_tasks)]


def rrf_select(cm: ConfidenceMatrix, n: int, params: RRFParams = RRFParams()) -> SelectionResult:
    if n < 0:
        raise ValidationError("selection size must be non-negative")
    scores = rrf_scores(task_rankings(cm), params)
    selected = rrf_order(scores)[:n]
    result = SelectionResult(selected, strategy="MT-RRF", n_tasks=cm.n_tasks)
    result.extras["rrf_scores"] = {i: scores[i] for i in selected}
    return result


def split_quotas(n: int, split: Sequence[float]) -> list[int]:
    """``floor(fraction * n)`` per task, leftovers handed out one per task from task 0.

    Tasks with a zero fraction never receive leftover slots.
    """
    split = np.asarray(split, dtype=float)
    if split.min() < 0 or abs(split.sum() - 1.0) > 1e-9:
        raise ValidationError("split fractions must be non-negative and sum to 1")
    # tiny epsilon so e.g. 0.7 * 10 lands on 7 rather than 6.999...
    quotas = [math.floor(f * n + 1e-9) for f in split]
    active = [t for t, f in enumerate(split) if f > 0]
    t = 0
    while sum(quotas) < n:
        quotas[active[t % len(active)]] += 1
        t += 1
    return quotas


def ind_select(cm: ConfidenceMatrix, n: int, split: Sequence[float] | None = None) -> SelectionResult:
    """Independent per-task picks under quotas, claimed round-robin.

    Tasks take turns in index order; on its turn a task with quota left
    claims its least-confident example not already claimed by anyone.
    """
    if n > cm.n_examples:
        raise ValidationError(f"cannot select {n} of {cm.n_examples} examples")
    if n < 0:
        raise ValidationError("selection size must be non-negative")
    t = cm.n_tasks
    split = [1.0 / t] * t if split is None else list(split)
    if len(split) != t:
        raise ValidationError(f"{len(split)} split fractions for {t} tasks")
    quotas = split_quotas(n, split)
    orders = [least_confident_order(cm.column(task), cm.ids) for task in range(t)]
    cursors = [0] * t
    taken: set = set()
    selected: list = []
    while len(selected) < n:
        progressed = False
        for task in range(t):
            if quotas[task] == 0:
                continue
            order = orders[task]
            while order[cursors[task]] in taken:
                cursors[task] += 1
            pick = order[cursors[task]]
            taken.add(pick)
            selected.append(pick)
            quotas[task] -= 1
            progressed = True
            if len(selected) == n:
                break
        if not progressed:
            break
    return SelectionResult(selected, strategy="MT-IND", n_tasks=t)
