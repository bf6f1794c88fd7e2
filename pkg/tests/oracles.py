"""Slow, obviously-correct reference implementations used by the tests.

Nothing here imports the library's algorithms; only plain Python loops,
itertools and numpy array arithmetic.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


# ------------------------------------------------------------------ Pareto


def dominates(a, b) -> bool:
    """``a`` dominates ``b`` when it is <= everywhere and < somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def brute_frontier(points: dict) -> set:
    """Ids whose vectors no other vector dominates (O(n^2) double loop)."""
    return {
        i for i, c in points.items()
        if not any(dominates(other, c) for j, other in points.items() if j != i)
    }


def brute_layers(points: dict) -> list:
    remaining = dict(points)
    layers = []
    while remaining:
        front = brute_frontier(remaining)
        layers.append(front)
        for i in front:
            del remaining[i]
    return layers


def peeled_layers(points: dict) -> list:
    """Same layers as :func:`brute_layers`, from one O(n^2) pass of pairwise checks."""
    keys = list(points)
    beaten_by = {i: 0 for i in keys}
    beats = {i: [] for i in keys}
    for i in keys:
        for j in keys:
            if i != j and dominates(points[i], points[j]):
                beats[i].append(j)
                beaten_by[j] += 1
    layers = []
    current = {i for i in keys if beaten_by[i] == 0}
    while current:
        layers.append(current)
        following = set()
        for i in current:
            for j in beats[i]:
                beaten_by[j] -= 1
                if beaten_by[j] == 0:
                    following.add(j)
        current = following
    return layers


def brute_pareto_select(points: dict, n: int, layers=None) -> list:
    """Whole layers sorted by (first coordinate, id); stride through the last."""
    chosen = []
    for layer in layers if layers is not None else brute_layers(points):
        left = n - len(chosen)
        if left == 0:
            break
        ordered = sorted(layer, key=lambda i: (points[i][0], i))
        if len(ordered) <= left:
            chosen += ordered
        else:
            step = len(ordered) // left
            chosen += [ordered[k * step] for k in range(left)]
    return chosen


# --------------------------------------------------------------------- BLP


def _bit_rows(n: int) -> np.ndarray:
    """All 2^n binary vectors as rows, in counting order."""
    codes = np.arange(2 ** n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def enumerate_knapsack(values, costs, budget) -> float:
    """Best total value over every subset whose cost fits."""
    values = np.asarray(values, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if values.size == 0:
        return 0.0
    rows = _bit_rows(values.size)
    feasible = rows @ costs <= budget
    return float((rows[feasible] @ values).max())


def enumerate_udjs(u, task_costs, jcost, budget) -> float:
    """Each example: skip, task 0 only, task 1 only, or both at the joint cost."""
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    best = 0.0
    options = [(0, 0), (1, 0), (0, 1), (1, 1)]
    for combo in itertools.product(range(4), repeat=n):
        value = cost = 0.0
        for r, choice in enumerate(combo):
            x0, x1 = options[choice]
            if x0 and x1:
                cost += jcost[r]
            else:
                cost += x0 * task_costs[r][0] + x1 * task_costs[r][1]
            value += x0 * u[r][0] + x1 * u[r][1]
        if cost <= budget and value > best:
            best = value
    return best


def enumerate_udjs_fast(u, task_costs, jcost, budget) -> float:
    """Vectorized :func:`enumerate_udjs` (base-4 codes), same semantics."""
    u = np.asarray(u, dtype=float)
    task_costs = np.asarray(task_costs, dtype=float)
    jcost = np.asarray(jcost, dtype=float)
    n = u.shape[0]
    codes = np.arange(4 ** n, dtype=np.int64)
    digits = (codes[:, None] // (4 ** np.arange(n))) % 4
    x0 = (digits & 1).astype(float)
    x1 = ((digits >> 1) & 1).astype(float)
    both = x0 * x1
    cost = (x0 - both) @ task_costs[:, 0] + (x1 - both) @ task_costs[:, 1] + both @ jcost
    value = x0 @ u[:, 0] + x1 @ u[:, 1]
    feasible = cost <= budget
    return float(value[feasible].max())


# -------------------------------------------------------------- statistics


def t_quantile_975_df9() -> float:
    """Two-sided 5% critical value of Student's t with 9 degrees of freedom."""
    return 2.262157162740992


def nonnull_counts(labels, lengths) -> list:
    counts, pos = [], 0
    for m in lengths:
        counts.append(sum(1 for v in labels[pos:pos + m] if v != 0))
        pos += m
    return counts


def entropy_confidence_loop(rows) -> float:
    """One minus mean per-token entropy / log s, with explicit loops."""
    m = len(rows)
    s = len(rows[0])
    h = 0.0
    for row in rows:
        for p in row:
            if p > 0:
                h -= p * math.log(p)
    return 1.0 - h / (m * math.log(s))
