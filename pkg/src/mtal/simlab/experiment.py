"""The multi-task active learning loop on synthetic data.

Each iteration trains a learner on the labeled pool, scores the unlabeled
pool, lets the configured strategy pick a batch (or a budgeted set), and
reveals those labels. All randomness derives from ``config.seed``; corpus,
initial split and dev sample depend on the seed only, so runs that differ
only in strategy or loss are paired.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .._random import make_rng
from ..budget import (
    DEFAULT_BUDGET,
    DEFAULT_TP,
    DEFAULT_TS,
    compute_costs,
    eqb_djs_select,
    greedy_budgeted_select,
    solve_joint_blp,
    solve_stcs_blp,
    solve_udjs_blp,
)
from ..errors import ValidationError
from ..scores import (
    dropout_agreements,
    fit_and_apply_temperature,
    overconfidence_error,
    token_entropy_confidences,
)
from ..selection import SINGLE_TASK, RANDOM, check_strategy, joint_uncertainty, score_kind, select
from ..strategies import AGREEMENT, ENTROPY, ConfidenceMatrix
from .corpus import CorpusSpec, SyntheticCorpus, generate_corpus
from .learner import LearnerConfig, ToyLearner, train_learner
from .metrics import evaluate, macro_f1

DECISIONS = ("count", "GRD_AL", "BLP_AL", "BLP")
BUDGET_FORMULATIONS = ("JOINT", "UDJS", "EQB_DJS", "STCS")
JOINT_AGGREGATIONS = {"MT-AVG": "AVG", "MT-MAX": "MAX", "MT-MIN": "MIN", "MT-RRF": "RRF"}


@dataclass
class ALExperimentConfig:
    scenario: str = "complementary"
    strategy: str = "MT-AVG"
    strategy_params: dict = field(default_factory=dict)
    iterations: int = 5
    initial_fraction: float = 0.02
    acquisition: int | None = None
    dev_multiplier: int = 2
    dropout_passes: int = 10
    decision: str = "count"
    formulation: str = "JOINT"
    budget: float = DEFAULT_BUDGET
    tp: float = DEFAULT_TP
    ts: float = DEFAULT_TS
    loss: str = "CE"
    alpha: float = 0.2
    learner: dict = field(default_factory=dict)
    corpus: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        check_strategy(self.strategy)
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if not 0.0 < self.initial_fraction <= 1.0:
            raise ValidationError("initial_fraction must lie in (0, 1]")
        if self.acquisition is not None and self.acquisition < 0:
            raise ValidationError("acquisition must be non-negative")
        if self.decision not in DECISIONS:
            raise ValidationError(f"decision must be one of {DECISIONS}")
        if self.formulation not in BUDGET_FORMULATIONS:
            raise ValidationError(f"formulation must be one of {BUDGET_FORMULATIONS}")
        if self.dropout_passes < 2:
            raise ValidationError("dropout_passes must be >= 2")
        if self.budget < 0:
            raise ValidationError("budget must be non-negative")
        self.corpus = dict(self.corpus)
        self.corpus.setdefault("scenario", self.scenario)
        if self.corpus["scenario"] != self.scenario:
            raise ValidationError("corpus.scenario disagrees with scenario")
        # fail fast on bad nested fields
        self.corpus_spec()
        self.learner_config()

    def corpus_spec(self) -> CorpusSpec:
        try:
            return CorpusSpec(**self.corpus)
        except TypeError as exc:
            raise ValidationError(f"corpus: {exc}") from exc

    def learner_config(self) -> LearnerConfig:
        options = {"loss": self.loss, "alpha": self.alpha, "shared": self.strategy not in SINGLE_TASK}
        try:
            return LearnerConfig(**{**options, **self.learner})
        except TypeError as exc:
            raise ValidationError(f"learner: {exc}") from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ALExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValidationError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**doc)


class PoolState:
    """Labeled/unlabeled partition of the training sentences.

    ``flags[id]`` records which tasks an example was annotated for. Once an
    example is selected it leaves the unlabeled pool, even if only some of
    its tasks were annotated.
    """

    def __init__(self, pool_ids, n_tasks: int):
        self.n_tasks = n_tasks
        self._unlabeled = set(int(i) for i in pool_ids)
        self.flags: dict = {}

    @property
    def labeled_ids(self) -> list:
        return sorted(self.flags)

    @property
    def unlabeled_ids(self) -> list:
        return sorted(self._unlabeled)

    def annotate(self, ids, flags=None) -> None:
        ids = [int(i) for i in ids]
        flags = np.ones((len(ids), self.n_tasks), dtype=bool) if flags is None else np.asarray(flags, bool)
        for i, f in zip(ids, flags):
            if i not in self._unlabeled:
                raise ValidationError(f"example {i} is not in the unlabeled pool")
            if not f.any():
                continue
            self._unlabeled.remove(i)
            self.flags[i] = tuple(bool(v) for v in f)

    def annotated_matrix(self, ids) -> np.ndarray:
        return np.asarray([self.flags[i] for i in ids], dtype=bool).reshape(len(ids), self.n_tasks)


@dataclass
class ALRunRecord:
    config: dict
    iterations: list = field(default_factory=list)
    stopped_early: bool = False
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "iterations": self.iterations,
            "stopped_early": self.stopped_early,
            "summary": self.summary,
        }

    def to_json(self) -> str:
        return json.dumps(_plain(self.to_dict()), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ALRunRecord":
        return cls(doc["config"], doc["iterations"], doc["stopped_early"], doc["summary"])


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _confidences(learner: ToyLearner, corpus: SyntheticCorpus, ids, k: int | None, seed: int):
    """Entropy confidences, argmax predictions and optional dropout agreement."""
    batch = corpus.batch(ids)
    logits = learner.logits(batch)
    ec = np.column_stack([
        token_entropy_confidences(softmax(z, axis=1), batch.task_lengths(i))
        for i, z in enumerate(logits)
    ])
    da = None
    if k is not None:
        ensembles = learner.dropout_predictions(batch, k, seed)
        da = np.column_stack([
            dropout_agreements(ens, batch.task_lengths(i)) for i, ens in enumerate(ensembles)
        ])
    return batch, logits, ec, da


def _sentence_accuracies(pred, gold, lengths) -> np.ndarray:
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    return np.add.reduceat((pred == gold).astype(float), starts) / lengths


def _overconfidence(batch, logits, conf, dev_batch, learner) -> dict:
    """OE per task on the scored pool, raw and after dev-fitted temperature."""
    raw, scaled, temps = [], [], []
    dev_logits = learner.logits(dev_batch)
    for i, z in enumerate(logits):
        lengths = batch.task_lengths(i)
        acc = _sentence_accuracies(z.argmax(axis=1), batch.gold[i], lengths)
        raw.append(overconfidence_error(list(zip(conf[:, i], acc))))
        temp, _ = fit_and_apply_temperature(dev_logits[i], dev_batch.gold[i])
        conf_t = token_entropy_confidences(softmax(z / temp, axis=1), lengths)
        scaled.append(overconfidence_error(list(zip(conf_t, acc))))
        temps.append(temp)
    return {"ec": raw, "ts": scaled, "temperature": temps}


def _test_scores(learner: ToyLearner, test_batch) -> dict:
    preds = learner.predict(test_batch)
    scores = {"metric": [], "macro_f1": []}
    for pred, gold, kind in zip(preds, test_batch.gold, test_batch.kinds):
        scores["metric"].append(evaluate(pred, gold, kind))
        scores["macro_f1"].append(macro_f1(pred, gold))
    return scores


def _budget_selection(config: ALExperimentConfig, cm: ConfidenceMatrix, corpus: SyntheticCorpus, budget: float,
                      order_seed: int):
    ids = list(cm.ids)
    costs = compute_costs(corpus.m[ids], corpus.nt[ids], config.tp, config.ts)
    if config.decision == "GRD_AL":
        params = dict(config.strategy_params)
        if config.strategy in RANDOM:
            params.setdefault("seed", order_seed)
        order = select(config.strategy, cm, cm.n_examples, params).ids
        rank = {example: pos for pos, example in enumerate(order)}
        result = greedy_budgeted_select([rank[i] for i in ids], costs, budget, ids)
        return result.ids, np.ones((len(result.ids), cm.n_tasks), dtype=bool)
    uncertainty = 1.0 - cm.scores
    if config.formulation == "UDJS":
        solution = solve_udjs_blp(uncertainty, costs, budget, ids)
    elif config.formulation == "EQB_DJS":
        solution = eqb_djs_select(uncertainty, costs, budget, ids)
    elif config.formulation == "STCS":
        solution = solve_stcs_blp(uncertainty, costs, budget, int(config.strategy_params.get("task", 0)), ids)
    else:
        if config.strategy not in JOINT_AGGREGATIONS:
            raise ValidationError(f"joint budget programs need one of {sorted(JOINT_AGGREGATIONS)}")
        u = joint_uncertainty(JOINT_AGGREGATIONS[config.strategy], cm, config.strategy_params)
        solution = solve_joint_blp(np.clip(u, 0.0, 1.0), costs, budget, ids)
    chosen = solution.selection()
    return chosen.ids, chosen.flags


def _labeled_cost(corpus: SyntheticCorpus, state: PoolState, tp, ts) -> float:
    ids = state.labeled_ids
    if not ids:
        return 0.0
    costs = compute_costs(corpus.m[ids], corpus.nt[ids], tp, ts)
    flags = state.annotated_matrix(ids)
    single = (costs.task_costs() * flags).sum(axis=1)
    return float(np.where(flags.all(axis=1), costs.jcost, single).sum())


def run_al_experiment(config: ALExperimentConfig, corpus: SyntheticCorpus | None = None,
                      on_scores=None) -> ALRunRecord:
    """Run the train / score / select / reveal loop and log every iteration.

    ``on_scores(iteration, cm, m, nt)`` is called with each confidence matrix
    used for a selection, plus the pool's token and entity counts.
    """
    corpus = corpus or generate_corpus(config.corpus_spec(), config.seed)
    learner_cfg = config.learner_config()
    n_tasks = 2
    split_rng = make_rng(config.seed, 1)
    n_train = corpus.train.size
    n0 = max(1, int(round(config.initial_fraction * n_train)))
    initial = np.sort(split_rng.choice(corpus.train, size=n0, replace=False))
    dev_ids = np.sort(split_rng.choice(corpus.dev, size=min(corpus.dev.size, config.dev_multiplier * n0),
                                       replace=False))
    acquisition = n0 if config.acquisition is None else config.acquisition
    state = PoolState(corpus.train, n_tasks)
    state.annotate(initial)

    dev_batch = corpus.batch(dev_ids)
    test_batch = corpus.batch(corpus.test)
    record = ALRunRecord(_plain(config.to_dict()))
    needs_da = score_kind(config.strategy) == AGREEMENT
    budgeted = config.decision != "count"
    selection_rounds = config.iterations - 1
    if config.decision == "BLP":
        selection_rounds = min(1, selection_rounds)

    iteration = 0
    while True:
        iteration += 1
        labeled = state.labeled_ids
        learner = train_learner(
            corpus.batch(labeled), dev_batch, corpus.n_labels, learner_cfg,
            seed=int(make_rng(config.seed, 2, iteration).integers(2**31)),
            annotated=state.annotated_matrix(labeled),
        )
        entry = {
            "iteration": iteration,
            "labeled": len(labeled),
            "labeled_fraction": len(labeled) / n_train,
            "annotated_per_task": state.annotated_matrix(labeled).sum(axis=0).tolist(),
            "labeled_cost": _labeled_cost(corpus, state, config.tp, config.ts),
            "epochs": learner.epochs_trained,
            "dev_geomean": learner.dev_score(dev_batch),
            "test": _test_scores(learner, test_batch),
            "selected": [],
            "selected_flags": [],
        }
        pool = state.unlabeled_ids
        if pool:
            batch, logits, ec, da = _confidences(
                learner, corpus, pool, config.dropout_passes if needs_da else None,
                int(make_rng(config.seed, 3, iteration).integers(2**31)),
            )
            entry["oe"] = _overconfidence(batch, logits, ec, dev_batch, learner)
            if da is not None:
                entry["oe"]["da"] = [
                    overconfidence_error(list(zip(da[:, i], _sentence_accuracies(
                        logits[i].argmax(axis=1), batch.gold[i], batch.task_lengths(i)))))
                    for i in range(n_tasks)
                ]
        record.iterations.append(entry)
        if iteration > selection_rounds:
            break
        if not pool:
            record.stopped_early = True
            break
        cm = ConfidenceMatrix(tuple(pool), np.clip(da if needs_da else ec, 0.0, 1.0), AGREEMENT if needs_da else ENTROPY)
        if on_scores is not None:
            on_scores(iteration, cm, corpus.m[pool], corpus.nt[pool])
        order_seed = int(make_rng(config.seed, 4, iteration).integers(2**31))
        if budgeted:
            budget = config.budget * (config.iterations - 1 if config.decision == "BLP" else 1)
            chosen, flags = _budget_selection(config, cm, corpus, budget, order_seed)
        else:
            params = dict(config.strategy_params)
            if config.strategy in RANDOM:
                params.setdefault("seed", order_seed)
            result = select(config.strategy, cm, acquisition, params)
            chosen, flags = result.ids, result.flags
        if not chosen:
            record.stopped_early = True
            break
        entry["selected"] = list(chosen)
        entry["selected_flags"] = np.asarray(flags, dtype=int).tolist()
        state.annotate(chosen, flags)

    final = record.iterations[-1]
    record.summary = {
        "iterations_run": len(record.iterations),
        "final_metric": final["test"]["metric"],
        "final_macro_f1": float(np.mean(final["test"]["macro_f1"])),
        "final_labeled_fraction": final["labeled_fraction"],
        "final_labeled_cost": final["labeled_cost"],
        "final_oe": float(np.mean(final["oe"]["ec"])) if "oe" in final else None,
        "final_oe_ts": float(np.mean(final["oe"]["ts"])) if "oe" in final else None,
    }
    return record
