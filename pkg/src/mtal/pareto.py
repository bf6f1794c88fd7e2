"""Layered Pareto-frontier selection over per-task confidence vectors.

Each unlabeled example is a point whose coordinates are its per-task
confidences. Lower is preferred (less confident), so a point is on the
frontier when no other point is at least as low on every task and strictly
lower on one. Frontiers are peeled repeatedly until the batch is filled.

The dominance relation is materialized as an ``n x n`` boolean matrix, so
memory and time are O(n^2 t); fine for pools up to ~1e4 examples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UnsupportedConfigurationError, ValidationError
from .strategies import ConfidenceMatrix, SelectionResult


@dataclass(frozen=True)
class ParetoPoint:
    id: int
    c: tuple

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))


@dataclass(frozen=True)
class ParetoConfig:
    n: int
    beta: float | None = None
    restricted_task: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("Pareto selection size must be >= 1")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ValidationError(f"beta={self.beta} outside [0, 1]")


def _as_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(points, ConfidenceMatrix):
        return np.asarray(points.ids), np.asarray(points.scores, dtype=float)
    points = list(points)
    if not points:
        raise ValidationError("no points given")
    ids = np.asarray([p.id for p in points])
    coords = np.asarray([p.c for p in points], dtype=float)
    if coords.ndim != 2:
        raise ValidationError("all points need the same dimension")
    return ids, coords


def _as_points(ids, coords, rows) -> list[ParetoPoint]:
    return [ParetoPoint(int(ids[r]), tuple(coords[r])) for r in rows]


def empirical_quantile(values, beta: float) -> float:
    """Nearest-rank quantile: the ``ceil(beta * n)``-th smallest value (1-based).

    ``beta = 0`` returns the minimum.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValidationError(f"beta={beta} outside [0, 1]")
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise ValidationError("quantile of an empty set")
    rank = max(1, math.ceil(beta * ordered.size))
    return float(ordered[rank - 1])


def dominance_matrix(coords, restricted: int | None = None, factor: float = 1.0) -> np.ndarray:
    """``D[i, j]`` is True when point ``i`` dominates point ``j`` (minimization).

    With ``restricted`` set, the comparison on that coordinate is scaled:
    ``i`` must satisfy ``c_i <= factor * c_j`` there (and ``<`` counts toward
    the strict part), which makes domination harder for ``factor < 1``.
    """
    coords = np.asarray(coords, dtype=float)
    left = coords[:, None, :]
    right = coords[None, :, :]
    if restricted is not None:
        right = right.copy()
        right[..., restricted] *= factor
    weak = np.all(left <= right, axis=2)
    strict = np.any(left < right, axis=2)
    dom = weak & strict
    np.fill_diagonal(dom, False)
    return dom


def _layers_from_dominance(dom: np.ndarray) -> list[np.ndarray]:
    remaining = np.ones(dom.shape[0], dtype=bool)
    dominators = dom.sum(axis=0)
    layers = []
    while remaining.any():
        layer = np.flatnonzero(remaining & (dominators == 0))
        if layer.size == 0:  # cannot happen for an acyclic relation
            raise RuntimeError("dominance relation has a cycle")
        layers.append(layer)
        remaining[layer] = False
        dominators = dominators - dom[layer].sum(axis=0)
    return layers


def _restriction(coords: np.ndarray, beta: float | None, restricted_task: int):
    """Which coordinate gets the quantile restriction, and its factor."""
    if beta is None or beta == 0.5:
        return None, 1.0
    if coords.shape[1] != 2:
        raise UnsupportedConfigurationError("beta-restricted Pareto needs exactly two tasks")
    if restricted_task not in (0, 1):
        raise ValidationError(f"restricted_task={restricted_task} must be 0 or 1")
    # beta < 0.5 restricts the named task; beta > 0.5 restricts the other one
    axis = restricted_task if beta < 0.5 else 1 - restricted_task
    return axis, empirical_quantile(coords[:, axis], beta)


def pareto_layers(points, beta: float | None = None, restricted_task: int = 1) -> list[list[ParetoPoint]]:
    """Peel successive frontiers until every point is assigned to one layer."""
    ids, coords = _as_arrays(points)
    axis, factor = _restriction(coords, beta, restricted_task)
    layers = _layers_from_dominance(dominance_matrix(coords, axis, factor))
    return [_as_points(ids, coords, layer) for layer in layers]


def pareto_frontier(points) -> list[ParetoPoint]:
    """Points not strictly dominated by any other; duplicates are all kept."""
    ids, coords = _as_arrays(points)
    dom = dominance_matrix(coords)
    return _as_points(ids, coords, np.flatnonzero(~dom.any(axis=0)))


def beta_pareto_frontier(points, beta: float, restricted_task: int = 1) -> list[ParetoPoint]:
    """Frontier under the quantile-restricted dominance test.

    For ``beta < 0.5`` the ``restricted_task`` coordinate comparison becomes
    ``c <= q * c'`` (strict part ``c < q * c'``), where ``q`` is the
    ``beta``-quantile of that coordinate over ``points``. For ``beta > 0.5``
    the same restriction moves to the other task's coordinate. ``beta = 0.5``
    is the plain frontier.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValidationError(f"beta={beta} outside [0, 1]")
    ids, coords = _as_arrays(points)
    if coords.shape[1] != 2:
        raise UnsupportedConfigurationError("beta-restricted Pareto needs exactly two tasks")
    axis, factor = _restriction(coords, beta, restricted_task)
    dom = dominance_matrix(coords, axis, factor)
    return _as_points(ids, coords, np.flatnonzero(~dom.any(axis=0)))


def stride_positions(f: int, p: int) -> list[int]:
    """Positions ``0, s, 2s, ...`` (``s = f // p``) picking ``p`` of ``f`` points."""
    if not 0 < p <= f:
        raise ValidationError(f"cannot pick {p} of {f} points")
    step = f // p
    return [i * step for i in range(p)]


def _first_axis_order(layer: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    return sorted(layer, key=lambda pt: (pt.c[0], pt.id))


def pareto_select(points, cfg: ParetoConfig) -> SelectionResult:
    """Fill the batch with whole frontier layers, striding through the last one."""
    ids, coords = _as_arrays(points)
    if cfg.n > ids.size:
        raise ValidationError(f"cannot select {cfg.n} of {ids.size} points")
    layers = pareto_layers(points, cfg.beta, cfg.restricted_task)
    chosen: list[ParetoPoint] = []
    for layer in layers:
        remaining = cfg.n - len(chosen)
        if remaining == 0:
            break
        ordered = _first_axis_order(layer)
        if len(ordered) <= remaining:
            chosen.extend(ordered)
        else:
            chosen.extend(ordered[i] for i in stride_positions(len(ordered), remaining))
    name = "MT-PAR" if cfg.beta is None else f"MT-PAR(beta={cfg.beta})"
    return SelectionResult([pt.id for pt in chosen], strategy=name, n_tasks=coords.shape[1])
