"""Registry of named selection methods.

Names follow the usual single-task (ST-) / multi-task (MT-) taxonomy. The
ST-/MT- prefixes differ only in which model produced the confidences; given
a confidence matrix both select identically. Budget formulations are listed
in :data:`BUDGET_FORMULATIONS` and handled by :mod:`mtal.budget`.
"""
from __future__ import annotations

from typing import Any

import numpy as np

from .errors import ValidationError
from .fusion import RRFParams, ind_select, rrf_scores, rrf_select, task_rankings
from .pareto import ParetoConfig, pareto_select
from .strategies import (
    AGREEMENT,
    AggregationScheme,
    ConfidenceMatrix,
    SelectionResult,
    aggregate_confidences,
    beta_weights,
    random_select,
    rank_by_confidence,
)

STRATEGIES = (
    "ST-R", "ST-EC", "ST-DA",
    "MT-R", "MT-EC", "MT-DA",
    "MT-AVG", "MT-AVGDA", "MT-MAX", "MT-MIN",
    "MT-PAR", "MT-RRF", "MT-IND",
)
BUDGET_FORMULATIONS = (
    "GRD", "UDJS", "EQB-DJS",
    "JOINT-AVG", "JOINT-MAX", "JOINT-MIN", "JOINT-RRF",
    "STCS",
)
RANDOM = ("ST-R", "MT-R")
AGREEMENT_BASED = ("ST-DA", "MT-DA", "MT-AVGDA")
SINGLE_TASK = ("ST-R", "ST-EC", "ST-DA")
PARAMS = {"task", "beta", "weights", "k", "split", "seed", "restricted_task"}


def check_strategy(name: str) -> None:
    if name not in STRATEGIES:
        raise ValidationError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")


def score_kind(name: str) -> str:
    return AGREEMENT if name in AGREEMENT_BASED else "entropy-confidence"


def _weights(params: dict, t: int):
    if params.get("weights") is not None:
        return tuple(params["weights"])
    if params.get("beta") is not None:
        if t != 2:
            raise ValidationError("beta weighting is defined for two tasks")
        return beta_weights(params["beta"])
    return None


def select(name: str, cm: ConfidenceMatrix, n: int, params: dict[str, Any] | None = None) -> SelectionResult:
    """Pick ``n`` examples from ``cm`` with the named method."""
    check_strategy(name)
    params = dict(params or {})
    unknown = set(params) - PARAMS
    if unknown:
        raise ValidationError(f"unknown parameter(s) {sorted(unknown)} for {name}")
    if n < 0:
        raise ValidationError("selection size must be non-negative")
    n = min(n, cm.n_examples)
    t = cm.n_tasks
    if name in RANDOM:
        result = random_select(cm.ids, n, int(params.get("seed", 0)), name)
    elif name in ("ST-EC", "MT-EC", "ST-DA", "MT-DA"):
        task = int(params.get("task", 0))
        result = rank_by_confidence(cm.column(task), n, cm.ids, name)
    elif name in ("MT-AVG", "MT-AVGDA", "MT-MAX", "MT-MIN"):
        weights = _weights(params, t)
        if weights is not None and name == "MT-AVG":
            scheme = AggregationScheme.weighted(weights)
        else:
            scheme = AggregationScheme(name[3:])
        result = rank_by_confidence(aggregate_confidences(cm, scheme), n, cm.ids, name)
    elif name == "MT-PAR":
        if n == 0:
            result = SelectionResult([], strategy=name)
        else:
            cfg = ParetoConfig(n, params.get("beta"), int(params.get("restricted_task", 1)))
            result = pareto_select(cm, cfg)
    elif name == "MT-RRF":
        result = rrf_select(cm, n, RRFParams(float(params.get("k", 60.0)), _weights(params, t)))
    else:
        split = params.get("split")
        if split is None and params.get("beta") is not None:
            split = beta_weights(params["beta"])
        result = ind_select(cm, n, split)
    result.strategy = name
    result.n_tasks = t
    result.flags = np.ones((len(result.ids), t), dtype=bool)
    return result


def joint_uncertainty(name: str, cm: ConfidenceMatrix, params: dict | None = None) -> np.ndarray:
    """Per-example uncertainty in [0, 1] for joint-task budget programs.

    For the scoring aggregations this is ``1 - Conf``; for RRF it is the
    fused score divided by its maximum attainable value.
    """
    params = dict(params or {})
    t = cm.n_tasks
    if name in ("AVG", "MAX", "MIN"):
        weights = _weights(params, t)
        scheme = AggregationScheme.weighted(weights) if weights and name == "AVG" else AggregationScheme(name)
        return 1.0 - aggregate_confidences(cm, scheme)
    if name == "RRF":
        rp = RRFParams(float(params.get("k", 60.0)), _weights(params, t))
        scores = rrf_scores(task_rankings(cm), rp)
        weights = rp.weights or (1.0,) * t
        top = sum(weights) / (rp.k + 1)
        return np.asarray([scores[i] / top for i in cm.ids]) if top > 0 else np.zeros(cm.n_examples)
    raise ValidationError(f"no joint uncertainty for aggregation {name!r}")
