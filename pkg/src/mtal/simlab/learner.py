"""A small gated shared/private multi-task classifier in plain numpy.

For task ``i`` a token ``x`` is encoded by a shared map ``e_S = x W_S + b_S``
and a private map ``e_U = x W_U^i + b_U^i``; the decoder reads the gated mix

    a = sigmoid([e_S; e_U] W_g^i + b_g^i)
    g = a * e_S + (1 - a) * e_U

Token tasks decode every ``g``; sentence tasks decode the mean of ``g`` over
the sentence. With ``shared=False`` each task only sees its private encoder
(single-task models trained side by side).

Training is full-batch Adam on cross-entropy against optionally smoothed
targets, with early stopping on the dev geometric mean of task metrics.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .._random import make_rng
from ..errors import ValidationError
from ..scores import smoothed_target_matrix
from .corpus import Batch
from .metrics import evaluate, geometric_mean


@dataclass(frozen=True)
class LearnerConfig:
    hidden: int = 16
    epochs: int = 200
    lr: float = 0.05
    loss: str = "CE"  # "CE" or "LS"
    alpha: float = 0.2
    shared: bool = True
    patience: int = 20
    init_scale: float = 0.1
    dropout: float = 0.1

    def __post_init__(self):
        if self.loss not in ("CE", "LS"):
            raise ValidationError(f"unknown loss {self.loss!r}")
        if self.epochs < 0 or self.hidden < 1 or self.lr <= 0:
            raise ValidationError("invalid learner hyperparameters")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout rate outside [0, 1)")

    @property
    def smoothing(self) -> float:
        return self.alpha if self.loss == "LS" else 0.0


def _segment_mean(rows: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    return np.add.reduceat(rows, starts, axis=0) / lengths[:, None]


class ToyLearner:
    def __init__(self, d: int, n_labels, kinds, config: LearnerConfig = LearnerConfig(), seed: int = 0):
        self.d = d
        self.n_labels = tuple(n_labels)
        self.kinds = tuple(kinds)
        self.config = config
        rng = make_rng(seed, 201)
        h = config.hidden
        scale = config.init_scale

        def init(*shape):
            return rng.normal(0.0, scale, size=shape)

        self.params = {}
        if config.shared:
            self.params["W_S"] = init(d, h)
            self.params["b_S"] = np.zeros(h)
        for i, s in enumerate(self.n_labels):
            self.params[f"W_U{i}"] = init(d, h)
            self.params[f"b_U{i}"] = np.zeros(h)
            if config.shared:
                self.params[f"W_g{i}"] = init(2 * h, h)
                self.params[f"b_g{i}"] = np.zeros(h)
            self.params[f"V{i}"] = init(h, s)
            self.params[f"c{i}"] = np.zeros(s)
        self.epochs_trained = 0

    @property
    def n_tasks(self) -> int:
        return len(self.n_labels)

    # ---------------------------------------------------------------- forward

    def _forward(self, X, lengths):
        p = self.params
        cache = {"X": X, "lengths": lengths}
        if self.config.shared:
            cache["S"] = X @ p["W_S"] + p["b_S"]
        logits = []
        for i in range(self.n_tasks):
            U = X @ p[f"W_U{i}"] + p[f"b_U{i}"]
            if self.config.shared:
                S = cache["S"]
                A = expit(np.concatenate([S, U], axis=1) @ p[f"W_g{i}"] + p[f"b_g{i}"])
                G = A * S + (1.0 - A) * U
                cache[f"A{i}"] = A
            else:
                G = U
            cache[f"U{i}"] = U
            H = _segment_mean(G, lengths) if self.kinds[i] == "sentence" else G
            cache[f"H{i}"] = H
            logits.append(H @ p[f"V{i}"] + p[f"c{i}"])
        return logits, cache

    def _backward(self, cache, dlogits):
        p = self.params
        X, lengths = cache["X"], cache["lengths"]
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        dS_total = np.zeros_like(cache["S"]) if self.config.shared else None
        h = self.config.hidden
        for i in range(self.n_tasks):
            dL = dlogits[i]
            H = cache[f"H{i}"]
            grads[f"V{i}"] = H.T @ dL
            grads[f"c{i}"] = dL.sum(axis=0)
            dH = dL @ p[f"V{i}"].T
            dG = np.repeat(dH / lengths[:, None], lengths, axis=0) if self.kinds[i] == "sentence" else dH
            U = cache[f"U{i}"]
            if self.config.shared:
                S, A = cache["S"], cache[f"A{i}"]
                dZ = dG * (S - U) * A * (1.0 - A)
                SU = np.concatenate([S, U], axis=1)
                grads[f"W_g{i}"] = SU.T @ dZ
                grads[f"b_g{i}"] = dZ.sum(axis=0)
                dSU = dZ @ p[f"W_g{i}"].T
                dS_total += dG * A + dSU[:, :h]
                dU = dG * (1.0 - A) + dSU[:, h:]
            else:
                dU = dG
            grads[f"W_U{i}"] = X.T @ dU
            grads[f"b_U{i}"] = dU.sum(axis=0)
        if self.config.shared:
            grads["W_S"] = X.T @ dS_total
            grads["b_S"] = dS_total.sum(axis=0)
        return grads

    def logits(self, batch: Batch, rng=None):
        X = batch.features
        if rng is not None and self.config.dropout > 0:
            keep = 1.0 - self.config.dropout
            X = X * (rng.random(X.shape) < keep) / keep
        out, _ = self._forward(X, batch.lengths)
        return out

    def predict_proba(self, batch: Batch):
        return [softmax(z, axis=1) for z in self.logits(batch)]

    def predict(self, batch: Batch):
        return [z.argmax(axis=1) for z in self.logits(batch)]

    def dropout_predictions(self, batch: Batch, k: int, seed: int):
        """``k`` masked passes; per task a ``k x rows`` array of predicted labels."""
        if k < 2:
            raise ValidationError("dropout inference needs k >= 2 passes")
        rng = make_rng(seed, 301)
        passes = [[z.argmax(axis=1) for z in self.logits(batch, rng)] for _ in range(k)]
        return [np.stack([run[i] for run in passes]) for i in range(self.n_tasks)]

    # --------------------------------------------------------------- training

    def loss_and_grads(self, batch: Batch, row_masks):
        logits, cache = self._forward(batch.features, batch.lengths)
        dlogits = []
        loss = 0.0
        for i, z in enumerate(logits):
            mask = row_masks[i]
            count = int(mask.sum())
            target = smoothed_target_matrix(batch.gold[i], self.n_labels[i], self.config.smoothing)
            logp = log_softmax(z, axis=1)
            weight = mask / count if count else np.zeros(mask.size)
            loss += float(-(weight[:, None] * target * logp).sum())
            dlogits.append((np.exp(logp) - target) * weight[:, None])
        return loss, self._backward(cache, dlogits)

    def dev_score(self, batch: Batch) -> float:
        preds = self.predict(batch)
        return geometric_mean([
            evaluate(pred, gold, kind) for pred, gold, kind in zip(preds, batch.gold, batch.kinds)
        ])


def _row_masks(batch: Batch, annotated: np.ndarray | None):
    """Per-task output-row masks from per-sentence annotation flags."""
    masks = []
    for i, kind in enumerate(batch.kinds):
        sent = np.ones(batch.n_sentences, dtype=bool) if annotated is None else annotated[:, i]
        masks.append(sent.astype(float) if kind == "sentence" else np.repeat(sent, batch.lengths).astype(float))
    return masks


def train_learner(train: Batch, dev: Batch | None, n_labels, config: LearnerConfig = LearnerConfig(),
                  seed: int = 0, annotated: np.ndarray | None = None) -> ToyLearner:
    """Full-batch Adam with early stopping on the dev geometric mean.

    ``annotated`` (sentences x tasks, bool) restricts each task's loss to the
    sentences labeled for it; by default every sentence counts for every task.
    """
    if train.n_sentences == 0:
        raise ValidationError("cannot train on an empty labeled set")
    learner = ToyLearner(train.features.shape[1], n_labels, train.kinds, config, seed)
    masks = _row_masks(train, annotated)
    b1, b2, eps = 0.9, 0.999, 1e-8
    moment = {k: np.zeros_like(v) for k, v in learner.params.items()}
    second = {k: np.zeros_like(v) for k, v in learner.params.items()}
    best_score = -np.inf
    best_params = copy.deepcopy(learner.params)
    stale = 0
    for epoch in range(1, config.epochs + 1):
        _, grads = learner.loss_and_grads(train, masks)
        for key, g in grads.items():
            moment[key] = b1 * moment[key] + (1 - b1) * g
            second[key] = b2 * second[key] + (1 - b2) * g * g
            m_hat = moment[key] / (1 - b1 ** epoch)
            v_hat = second[key] / (1 - b2 ** epoch)
            learner.params[key] -= config.lr * m_hat / (np.sqrt(v_hat) + eps)
        learner.epochs_trained = epoch
        if dev is None:
            continue
        score = learner.dev_score(dev)
        if score > best_score:
            best_score, stale = score, 0
            best_params = copy.deepcopy(learner.params)
        else:
            stale += 1
            if stale >= config.patience:
                break
    if dev is not None and config.epochs > 0:
        learner.params = best_params
    return learner
