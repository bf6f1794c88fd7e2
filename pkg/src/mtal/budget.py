"""Cost-aware selection for tasks annotated at different granularity.

Costs per example (``m`` tokens, ``nt`` entities):

    cost_sf = m + tp * nt          token-level task
    cost_id = m + ts               sentence-level task
    jcost   = cost_sf + cost_id - m   both tasks, reading the sentence once

Selection regimes: a greedy least-confident scan under the budget, and exact
binary programs (joint-task, single-task-confidence, unrestricted disjoint
sets, equal-budget disjoint sets) solved by :func:`solve_blp_exact`.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import UnsupportedConfigurationError, ValidationError
from .strategies import SelectionResult, least_confident_order

DEFAULT_BUDGET = 500
DEFAULT_TP = 1
DEFAULT_TS = 3
DEFAULT_NODE_LIMIT = 10**6
EQB_MAX_ROUNDS = 10


# --------------------------------------------------------------------------
# cost model


@dataclass(frozen=True, eq=False)
class AnnotationCosts:
    m: np.ndarray
    nt: np.ndarray
    tp: float = DEFAULT_TP
    ts: float = DEFAULT_TS

    def __post_init__(self):
        m = np.asarray(self.m)
        nt = np.asarray(self.nt)
        if m.shape != nt.shape or m.ndim != 1:
            raise ValidationError("m and nt must be aligned 1-D arrays")
        if m.size and m.min() < 1:
            raise ValidationError("every example needs m >= 1 tokens")
        if nt.size and nt.min() < 0:
            raise ValidationError("entity counts must be non-negative")
        if self.tp < 0 or self.ts < 0:
            raise ValidationError("tp and ts must be non-negative")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "nt", nt)

    def __len__(self):
        return self.m.size

    @property
    def cost_sf(self) -> np.ndarray:
        return self.m + self.tp * self.nt

    @property
    def cost_id(self) -> np.ndarray:
        return self.m + self.ts

    @property
    def jcost(self) -> np.ndarray:
        return self.cost_sf + self.cost_id - self.m

    def task_costs(self) -> np.ndarray:
        """``n x 2`` matrix of single-task costs (token task, sentence task)."""
        return np.column_stack([self.cost_sf, self.cost_id])

    def subset(self, rows) -> "AnnotationCosts":
        return AnnotationCosts(self.m[rows], self.nt[rows], self.tp, self.ts)


def compute_costs(m, nt, tp: float = DEFAULT_TP, ts: float = DEFAULT_TS) -> AnnotationCosts:
    m = np.asarray(m)
    nt = np.asarray(nt)
    for name, arr in (("m", m), ("nt", nt)):
        if arr.size and arr.min() < 0:
            raise ValidationError(f"negative {name} count")
    return AnnotationCosts(m, nt, tp, ts)


# --------------------------------------------------------------------------
# greedy regime


def greedy_budgeted_select(scores, costs, budget: float, ids=None) -> SelectionResult:
    """Scan least-confident first; keep each example whose joint cost still fits.

    ``costs`` is either an :class:`AnnotationCosts` (joint cost used) or a
    plain per-example cost vector.
    """
    scores = np.asarray(scores, dtype=float)
    jcost = costs.jcost if isinstance(costs, AnnotationCosts) else np.asarray(costs)
    ids = np.arange(scores.size) if ids is None else np.asarray(ids)
    if jcost.shape != scores.shape:
        raise ValidationError("scores and costs must be aligned")
    position = {int(i): r for r, i in enumerate(ids)}
    remaining = budget
    chosen = []
    spent = 0
    for example in least_confident_order(scores, ids):
        c = jcost[position[example]]
        if c <= remaining:
            chosen.append(example)
            remaining -= c
            spent += c
    return SelectionResult(chosen, strategy="GRD_AL", total_cost=spent, n_tasks=2)


# --------------------------------------------------------------------------
# exact solver


@dataclass
class BLPResult:
    flags: np.ndarray
    objective: float
    optimal: bool
    nodes: int = 0


@dataclass
class _Group:
    variables: tuple
    options: list  # (assignment tuple, value, cost), lexicographic order


def _build_groups(values, costs, budget, links) -> list[_Group]:
    n = values.size
    owner = np.full(n, -1)
    groups = []
    for li, (y, xs) in enumerate(links):
        members = [int(y), *map(int, xs)]
        if len(set(members)) != len(members) or not xs:
            raise ValidationError(f"link {li} must tie one Y to distinct X variables")
        for v in members:
            if not 0 <= v < n:
                raise ValidationError(f"link {li} references unknown variable {v}")
            if owner[v] >= 0:
                raise ValidationError(f"variable {v} appears in more than one link")
            owner[v] = li
        variables = tuple(sorted(members))
        pos = {v: k for k, v in enumerate(variables)}
        y_forced = costs[y] <= 0 and values[y] >= 0
        options = []
        for picks in itertools.product((0, 1), repeat=len(xs)):
            assign = [0] * len(variables)
            for x, bit in zip(xs, picks):
                assign[pos[x]] = bit
            if all(picks):
                full = list(assign)
                full[pos[y]] = 1
                options.append(tuple(full))
                if y_forced:
                    continue  # Y=1 costs no more and is worth no less
            options.append(tuple(assign))
        groups.append((variables, options))
    for v in range(n):
        if owner[v] < 0:
            groups.append(((v,), [(0,), (1,)]))

    built = []
    for variables, options in sorted(groups, key=lambda g: g[0][0]):
        idx = np.asarray(variables)
        kept = []
        for assign in sorted(set(options)):
            if not any(assign):
                continue
            a = np.asarray(assign, dtype=bool)
            value = float(values[idx[a]].sum())
            cost = float(costs[idx[a]].sum())
            if cost < 0:
                raise ValidationError(f"variables {variables} admit a negative-cost assignment")
            if value > 0 and cost <= budget:
                kept.append((assign, value, cost))
        # strictly dominated options can never be part of an optimum
        kept = [
            o for o in kept
            if not any(p[1] > o[1] and p[2] <= o[2] for p in kept)
        ]
        built.append(_Group(variables, kept))
    return built


def _hull_segments(groups: list[_Group]):
    """Upper concave hull increments of every group, sorted by slope."""
    rows = []
    for g, group in enumerate(groups):
        pts = sorted(
            ((cost, value, j) for j, (_, value, cost) in enumerate(group.options)),
            key=lambda p: (p[0], -p[1]),
        )
        hull = [(0.0, 0.0, -1)]
        for c, v, j in pts:
            if v <= hull[-1][1]:
                continue
            while len(hull) >= 2:
                (c0, v0, _), (c1, v1, _) = hull[-2], hull[-1]
                if (c1 - c0) * (v - v0) - (v1 - v0) * (c - c0) >= 0:
                    hull.pop()
                else:
                    break
            hull.append((c, v, j))
        for (c0, v0, _), (c1, v1, j1) in zip(hull, hull[1:]):
            dc, dv = c1 - c0, v1 - v0
            slope = np.inf if dc == 0 else dv / dc
            rows.append((slope, g, dc, dv, j1))
    rows.sort(key=lambda r: (-r[0], r[1]))
    if not rows:
        empty = np.zeros(0)
        return empty.astype(int), empty, empty, empty.astype(int)
    _, grp, dc, dv, opt = zip(*rows)
    return np.asarray(grp), np.asarray(dc, float), np.asarray(dv, float), np.asarray(opt)


class _Bounder:
    def __init__(self, groups):
        self.seg_group, self.seg_dc, self.seg_dv, self.seg_opt = _hull_segments(groups)

    def relax(self, mask: np.ndarray, residual: float):
        """LP relaxation over the segments in ``mask``.

        Returns ``(bound, whole, critical)``: the LP value, the masked segment
        positions taken whole, and the fractional segment's group (or -1).
        """
        dc = self.seg_dc[mask]
        dv = self.seg_dv[mask]
        cum = np.cumsum(dc)
        k = int(np.searchsorted(cum, residual, side="right"))
        bound = float(dv[:k].sum())
        critical = -1
        if k < dc.size:
            left = residual - (cum[k - 1] if k else 0.0)
            if left > 0:
                bound += dv[k] * left / dc[k]
                critical = int(self.seg_group[mask][k])
        return bound, k, critical

    def integral_choice(self, mask: np.ndarray, whole: int) -> dict:
        """Option per group implied by the whole segments of a relaxation."""
        chosen = {}
        for g, j in zip(self.seg_group[mask][:whole], self.seg_opt[mask][:whole]):
            chosen[int(g)] = int(j)
        return chosen


def _tolerance(value: float) -> float:
    return 1e-12 * max(1.0, abs(value))


def _best_value(groups, budget, bounder: _Bounder, node_limit: int):
    """Depth-first branch and bound; branches on the LP's fractional group."""
    n_groups = len(groups)
    # choice: -1 free, otherwise option index (or None for "take nothing")
    free_all = np.ones(n_groups, dtype=bool)
    bound, whole, _ = bounder.relax(free_all[bounder.seg_group], budget)
    start = bounder.integral_choice(free_all[bounder.seg_group], whole)
    best_value = sum(groups[g].options[j][1] for g, j in start.items())
    best_choice = start
    stack = [({}, 0.0, float(budget))]
    nodes = 0
    while stack:
        fixed, acc, residual = stack.pop()
        nodes += 1
        if nodes > node_limit:
            return best_value, best_choice, False, nodes
        free = free_all.copy()
        if fixed:
            free[list(fixed)] = False
        mask = free[bounder.seg_group]
        lp, whole, critical = bounder.relax(mask, residual)
        if acc + lp <= best_value + _tolerance(best_value):
            continue
        implied = bounder.integral_choice(mask, whole)
        whole_value = acc + sum(groups[g].options[j][1] for g, j in implied.items())
        if whole_value > best_value + _tolerance(best_value):
            best_value = whole_value
            best_choice = {g: j for g, j in fixed.items() if j is not None} | implied
        if critical < 0:
            continue
        group = groups[critical]
        children = [(None, 0.0, 0.0)] + [
            (j, value, cost) for j, (_, value, cost) in enumerate(group.options)
            if cost <= residual
        ]
        # highest-value child explored first
        children.sort(key=lambda ch: ch[1])
        for j, value, cost in children:
            stack.append(({**fixed, critical: j}, acc + value, residual - cost))
    return best_value, best_choice, True, nodes


def _lexicographic_optimum(groups, budget, bounder: _Bounder, target: float, node_limit: int):
    """First assignment in lexicographic order whose value reaches ``target``."""
    threshold = target - _tolerance(target)
    n_groups = len(groups)
    assign: list = [None] * n_groups
    stack = [(0, 0.0, float(budget), None)]
    nodes = 0
    while stack:
        depth, acc, residual, choice = stack.pop()
        nodes += 1
        if nodes > node_limit:
            return None, nodes
        if depth:
            assign[depth - 1] = choice
        if acc >= threshold:
            # zeros are the smallest completion and keep the value
            return {g: assign[g] for g in range(depth) if assign[g] is not None}, nodes
        if depth == n_groups:
            continue
        lp, _, _ = bounder.relax(bounder.seg_group >= depth, residual)
        if acc + lp < threshold:
            continue
        options = groups[depth].options
        for j in range(len(options) - 1, -1, -1):
            _, value, cost = options[j]
            if cost <= residual:
                stack.append((depth + 1, acc + value, residual - cost, j))
        stack.append((depth + 1, acc, residual, None))
    return None, nodes


def solve_blp_exact(values, costs, budget: float, links: Sequence = (), node_limit: int = DEFAULT_NODE_LIMIT) -> BLPResult:
    """Maximize ``values @ z`` subject to ``costs @ z <= budget``, ``z`` binary.

    ``links`` holds ``(y, xs)`` pairs enforcing ``z[y] <= z[x]`` for each
    ``x`` in ``xs``; linked variables are enumerated jointly, so each link
    should tie only a handful of variables. Among optimal vectors the
    lexicographically smallest is returned (exact when each link's variables
    are contiguous indices). If ``node_limit`` is hit the best vector found
    is returned with ``optimal=False``.
    """
    values = np.asarray(values, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if values.shape != costs.shape or values.ndim != 1:
        raise ValidationError("values and costs must be aligned 1-D arrays")
    if budget < 0:
        raise ValidationError("budget must be non-negative")
    groups = _build_groups(values, costs, budget, links)
    bounder = _Bounder(groups)
    best_value, best_choice, optimal, nodes = _best_value(groups, budget, bounder, node_limit)
    choice = best_choice
    if optimal:
        lex, more = _lexicographic_optimum(groups, budget, bounder, best_value, node_limit)
        nodes += more
        if lex is not None:
            choice = lex
    flags = np.zeros(values.size, dtype=bool)
    for g, j in choice.items():
        assign = groups[g].options[j][0]
        for v, bit in zip(groups[g].variables, assign):
            flags[v] = bool(bit)
    objective = float(values[flags].sum())
    return BLPResult(flags, objective, optimal, nodes)


# --------------------------------------------------------------------------
# formulations


@dataclass
class BudgetSolution:
    ids: list
    x: np.ndarray  # n x t task flags
    y: np.ndarray  # joint flags
    objective: float
    total_cost: float
    optimal: bool
    formulation: str = ""
    history: list = field(default_factory=list)

    def selection(self) -> SelectionResult:
        rows = np.flatnonzero(self.x.any(axis=1))
        return SelectionResult(
            [self.ids[r] for r in rows],
            flags=self.x[rows],
            strategy=self.formulation,
            total_cost=self.total_cost,
        )

    def to_dict(self) -> dict:
        return {
            "formulation": self.formulation,
            "objective": self.objective,
            "total_cost": self.total_cost,
            "optimal": self.optimal,
            "history": list(self.history),
            "examples": [
                {"id": int(i), "X": [int(v) for v in xr], "Y": int(yv)}
                for i, xr, yv in zip(self.ids, self.x, self.y)
            ],
        }


def _ids(n, ids):
    return list(range(n)) if ids is None else [int(i) for i in ids]


def _spend(x: np.ndarray, y: np.ndarray, task_costs: np.ndarray, jcost: np.ndarray) -> float:
    single = (task_costs * x).sum(axis=1)
    return float(np.where(y, jcost, single).sum())


def _check_uncertainty(u: np.ndarray):
    if u.size and (u.min() < 0 or u.max() > 1):
        raise ValidationError("uncertainties must lie in [0, 1]")


def solve_joint_blp(uncertainty, jcost, budget: float, ids=None, n_tasks: int = 2,
                    node_limit: int = DEFAULT_NODE_LIMIT, formulation: str = "JOINT") -> BudgetSolution:
    """Every chosen example is annotated on all tasks at its joint cost."""
    u = np.asarray(uncertainty, dtype=float)
    jcost = np.asarray(jcost.jcost if isinstance(jcost, AnnotationCosts) else jcost, dtype=float)
    _check_uncertainty(u)
    res = solve_blp_exact(u, jcost, budget, node_limit=node_limit)
    y = res.flags
    x = np.repeat(y[:, None], n_tasks, axis=1)
    return BudgetSolution(
        _ids(u.size, ids), x, y.copy(), res.objective,
        float(jcost[y].sum()), res.optimal, formulation,
    )


def _task_cost_arrays(costs, n_tasks):
    if isinstance(costs, AnnotationCosts):
        if n_tasks != 2:
            raise UnsupportedConfigurationError("the annotation cost model covers two tasks")
        return costs.task_costs().astype(float), costs.jcost.astype(float)
    task_costs, jcost = costs
    return np.asarray(task_costs, dtype=float), np.asarray(jcost, dtype=float)


def solve_udjs_blp(uncertainties, costs, budget: float, ids=None,
                   node_limit: int = DEFAULT_NODE_LIMIT) -> BudgetSolution:
    """Per-task annotation flags with joint pricing when all tasks are chosen.

    ``costs`` is an :class:`AnnotationCosts` or a ``(task_costs, jcost)``
    pair. Maximizes ``sum (1 - conf_t) X_t`` under
    ``sum cost_t (X_t - Y) + jcost Y <= B`` with ``Y <= X_t``.
    """
    u = np.asarray(uncertainties, dtype=float)
    if u.ndim != 2 or u.shape[1] < 2:
        raise ValidationError("UDJS needs an n x t uncertainty matrix with t >= 2")
    _check_uncertainty(u)
    n, t = u.shape
    task_costs, jcost = _task_cost_arrays(costs, t)
    if task_costs.shape != (n, t) or jcost.shape != (n,):
        raise ValidationError("cost arrays do not match the uncertainty matrix")
    width = t + 1
    values = np.zeros(n * width)
    var_costs = np.zeros(n * width)
    links = []
    for r in range(n):
        base = r * width
        values[base:base + t] = u[r]
        var_costs[base:base + t] = task_costs[r]
        var_costs[base + t] = jcost[r] - task_costs[r].sum()
        links.append((base + t, list(range(base, base + t))))
    res = solve_blp_exact(values, var_costs, budget, links, node_limit)
    flags = res.flags.reshape(n, width)
    x, y = flags[:, :t].copy(), flags[:, t].copy()
    return BudgetSolution(
        _ids(n, ids), x, y, float((u * x).sum()),
        _spend(x, y, task_costs, jcost), res.optimal, "UDJS",
    )


def eqb_djs_select(uncertainties, costs: AnnotationCosts, budget: float, ids=None,
                   max_rounds: int = EQB_MAX_ROUNDS,
                   node_limit: int = DEFAULT_NODE_LIMIT) -> BudgetSolution:
    """Two single-task knapsacks on half the budget each, re-solved on freed budget.

    Examples picked by both tasks are charged their joint cost; the budget
    this frees is pooled with any unspent remainder and split equally again.
    Rounds repeat while a round frees budget, up to ``max_rounds``.
    """
    u = np.asarray(uncertainties, dtype=float)
    if u.ndim != 2 or u.shape[1] != 2:
        raise UnsupportedConfigurationError("EQB-DJS is defined for exactly two tasks")
    _check_uncertainty(u)
    n = u.shape[0]
    task_costs, jcost = _task_cost_arrays(costs, 2)
    x = np.zeros((n, 2), dtype=bool)
    history = []
    optimal = True
    converged = False
    for _ in range(max_rounds):
        y = x.all(axis=1)
        spent = _spend(x, y, task_costs, jcost)
        residual = budget - spent
        halves = (residual // 2, residual - residual // 2)
        counted = 0.0
        proposals = []
        for task in range(2):
            open_rows = np.flatnonzero(~x[:, task])
            other = 1 - task
            marginal = np.where(
                x[open_rows, other],
                jcost[open_rows] - task_costs[open_rows, other],
                task_costs[open_rows, task],
            )
            res = solve_blp_exact(u[open_rows, task], marginal, max(halves[task], 0), node_limit=node_limit)
            optimal &= res.optimal
            proposals.append(open_rows[res.flags])
            counted += float(marginal[res.flags].sum())
        for task, rows in enumerate(proposals):
            x[rows, task] = True
        y = x.all(axis=1)
        actual = _spend(x, y, task_costs, jcost)
        history.append(actual)
        if counted - (actual - spent) <= 0:
            converged = True
            break
    optimal &= converged
    y = x.all(axis=1)
    return BudgetSolution(
        _ids(n, ids), x, y, float((u * x).sum()),
        _spend(x, y, task_costs, jcost), optimal, "EQB-DJS", history,
    )


def solve_stcs_blp(uncertainties, costs, budget: float, task: int, ids=None,
                   node_limit: int = DEFAULT_NODE_LIMIT) -> BudgetSolution:
    """Joint annotation, objective counts only ``task``'s uncertainty."""
    u = np.asarray(uncertainties, dtype=float)
    if u.ndim != 2 or not 0 <= task < u.shape[1]:
        raise ValidationError(f"task {task} not in the uncertainty matrix")
    return solve_joint_blp(u[:, task], costs, budget, ids, u.shape[1], node_limit, f"STCS-{task}")


# --------------------------------------------------------------------------
# serializable program


FORMULATIONS = ("UDJS", "EQB_DJS", "JOINT", "STCS")


@dataclass
class BudgetProgram:
    """A budgeted-selection instance: per-example uncertainties, costs, budget."""

    formulation: str
    ids: list
    uncertainties: np.ndarray  # n x t, 1 - confidence
    m: np.ndarray
    nt: np.ndarray
    budget: float = DEFAULT_BUDGET
    tp: float = DEFAULT_TP
    ts: float = DEFAULT_TS
    task: int | None = None

    def __post_init__(self):
        self.uncertainties = np.asarray(self.uncertainties, dtype=float)
        if self.uncertainties.ndim == 1:
            self.uncertainties = self.uncertainties[:, None]
        self.m = np.asarray(self.m, dtype=int)
        self.nt = np.asarray(self.nt, dtype=int)
        if self.formulation not in FORMULATIONS:
            raise ValidationError(f"unknown formulation {self.formulation!r}")
        if self.budget < 0:
            raise ValidationError("budget must be non-negative")
        if self.formulation == "STCS" and self.task is None:
            raise ValidationError("STCS needs the task whose uncertainty is maximized")
        _check_uncertainty(self.uncertainties)

    @property
    def costs(self) -> AnnotationCosts:
        return compute_costs(self.m, self.nt, self.tp, self.ts)

    def solve(self, node_limit: int = DEFAULT_NODE_LIMIT) -> BudgetSolution:
        if self.formulation == "UDJS":
            return solve_udjs_blp(self.uncertainties, self.costs, self.budget, self.ids, node_limit)
        if self.formulation == "EQB_DJS":
            return eqb_djs_select(self.uncertainties, self.costs, self.budget, self.ids, node_limit=node_limit)
        if self.formulation == "STCS":
            return solve_stcs_blp(self.uncertainties, self.costs, self.budget, self.task, self.ids, node_limit)
        if self.uncertainties.shape[1] != 1:
            raise ValidationError("JOINT needs one aggregated uncertainty per example")
        return solve_joint_blp(self.uncertainties[:, 0], self.costs, self.budget, self.ids,
                               node_limit=node_limit)

    def to_json(self) -> str:
        doc = {
            "formulation": self.formulation,
            "budget": self.budget,
            "tp": self.tp,
            "ts": self.ts,
            "task": self.task,
            "examples": [
                {"id": int(i), "uncertainty": [float(v) for v in u], "m": int(m), "nt": int(nt)}
                for i, u, m, nt in zip(self.ids, self.uncertainties, self.m, self.nt)
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BudgetProgram":
        try:
            doc = json.loads(text)
            rows = doc["examples"]
            return cls(
                formulation=doc["formulation"],
                ids=[int(r["id"]) for r in rows],
                uncertainties=np.asarray([r["uncertainty"] for r in rows], dtype=float).reshape(len(rows), -1),
                m=[r["m"] for r in rows],
                nt=[r["nt"] for r in rows],
                budget=doc.get("budget", DEFAULT_BUDGET),
                tp=doc.get("tp", DEFAULT_TP),
                ts=doc.get("ts", DEFAULT_TS),
                task=doc.get("task"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed budget program: {exc}") from exc
