"""Synthetic two-task corpora.

Sentences are sequences of feature-vector tokens drawn from label-conditional
Gaussian clusters. Task A is always a token task whose label 0 is the null
("O") label. Task B depends on the scenario:

``complementary``
    Token labels that are a fixed function of the task-A label (before noise).
``hierarchical``
    Token labels that are null exactly where task A is null; elsewhere they
    combine the task-A label with a hidden binary attribute also visible in
    the features.
``granularity``
    One sentence label: the most frequent non-null task-A label, or 0 when
    the sentence has no entity.

Each sentence also has a topic that skews which entity types it contains and
shifts its features, so rare entity types cluster in rare sentences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._random import make_rng
from ..errors import ValidationError

SCENARIOS = ("complementary", "hierarchical", "granularity")


@dataclass(frozen=True)
class CorpusSpec:
    scenario: str = "complementary"
    n_train: int = 1000
    n_dev: int = 200
    n_test: int = 400
    d: int = 8
    n_labels_a: int = 5
    min_len: int = 4
    max_len: int = 12
    entity_rate: float = 0.35
    n_topics: int = 4
    topic_skew: float = 1.2
    separation: float = 1.6
    topic_shift: float = 0.6
    feature_noise: float = 1.0
    noise: float = 0.05

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}")
        if min(self.n_train, self.n_dev, self.n_test) < 1:
            raise ValidationError("every split needs at least one sentence")
        if self.d < 1 or self.n_labels_a < 2 or self.n_topics < 1:
            raise ValidationError("degenerate corpus dimensions")
        if not 1 <= self.min_len <= self.max_len:
            raise ValidationError("need 1 <= min_len <= max_len")
        for name in ("entity_rate", "noise"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} outside [0, 1]")

    @property
    def n_labels_b(self) -> int:
        if self.scenario == "complementary":
            return max(2, (self.n_labels_a + 1) // 2)
        if self.scenario == "hierarchical":
            return 1 + 2 * (self.n_labels_a - 1)
        return self.n_labels_a

    @property
    def kind_b(self) -> str:
        return "sentence" if self.scenario == "granularity" else "token"

    @property
    def n_sentences(self) -> int:
        return self.n_train + self.n_dev + self.n_test


@dataclass(eq=False)
class SyntheticCorpus:
    """Flat token storage; sentence ``i`` owns rows ``offsets[i]:offsets[i+1]``."""

    spec: CorpusSpec
    features: np.ndarray  # tokens x d
    labels_a: np.ndarray  # per token
    labels_b: np.ndarray  # per token, or per sentence for granularity
    lengths: np.ndarray
    train: np.ndarray
    dev: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        self.offsets = np.concatenate(([0], np.cumsum(self.lengths)))

    @property
    def n_labels(self) -> tuple[int, int]:
        return self.spec.n_labels_a, self.spec.n_labels_b

    @property
    def kinds(self) -> tuple[str, str]:
        return "token", self.spec.kind_b

    @property
    def m(self) -> np.ndarray:
        return self.lengths.copy()

    @property
    def nt(self) -> np.ndarray:
        """Entity count per sentence (non-null task-A tokens)."""
        nonnull = (self.labels_a != 0).astype(int)
        return np.add.reduceat(nonnull, self.offsets[:-1])

    def token_rows(self, sentences) -> np.ndarray:
        sentences = np.asarray(sentences, dtype=int)
        if sentences.size == 0:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.arange(self.offsets[s], self.offsets[s + 1]) for s in sentences])

    def batch(self, sentences):
        """Features, lengths and per-task gold labels for ``sentences``."""
        sentences = np.asarray(sentences, dtype=int)
        rows = self.token_rows(sentences)
        gold_b = self.labels_b[sentences] if self.spec.kind_b == "sentence" else self.labels_b[rows]
        return Batch(self.features[rows], self.lengths[sentences], (self.labels_a[rows], gold_b), self.kinds)


@dataclass(eq=False)
class Batch:
    features: np.ndarray
    lengths: np.ndarray
    gold: tuple
    kinds: tuple

    @property
    def n_sentences(self) -> int:
        return self.lengths.size

    def task_lengths(self, task: int) -> np.ndarray:
        """Rows per sentence in a task's output (1 for sentence-level tasks)."""
        if self.kinds[task] == "sentence":
            return np.ones_like(self.lengths)
        return self.lengths


def _entity_distribution(spec: CorpusSpec, rng) -> np.ndarray:
    """Per-topic distribution over entity types 1..s-1 (rows sum to 1)."""
    types = spec.n_labels_a - 1
    base = 1.0 / np.arange(1, types + 1) ** spec.topic_skew
    rows = []
    for topic in range(spec.n_topics):
        weights = np.roll(base, topic) * rng.uniform(0.5, 1.5, size=types)
        rows.append(weights / weights.sum())
    return np.asarray(rows)


def generate_corpus(spec: CorpusSpec | None = None, seed: int = 0, **overrides) -> SyntheticCorpus:
    spec = spec or CorpusSpec()
    if overrides:
        spec = CorpusSpec(**{**spec.__dict__, **overrides})
    rng = make_rng(seed, 101)
    d, s_a = spec.d, spec.n_labels_a
    label_means = rng.normal(0.0, spec.separation, size=(s_a, d))
    topic_means = rng.normal(0.0, spec.topic_shift, size=(spec.n_topics, d))
    attr_means = rng.normal(0.0, spec.separation, size=(2, d))
    topic_prior = 1.0 / np.arange(1, spec.n_topics + 1) ** spec.topic_skew
    topic_prior /= topic_prior.sum()
    entity_dist = _entity_distribution(spec, rng)

    n = spec.n_sentences
    lengths = rng.integers(spec.min_len, spec.max_len + 1, size=n)
    topics = rng.choice(spec.n_topics, size=n, p=topic_prior)
    total = int(lengths.sum())
    sentence_of = np.repeat(np.arange(n), lengths)
    token_topic = topics[sentence_of]

    is_entity = rng.random(total) < spec.entity_rate
    cum = entity_dist.cumsum(axis=1)
    draws = rng.random(total)
    entity_type = 1 + (draws[:, None] > cum[token_topic]).sum(axis=1)
    entity_type = np.minimum(entity_type, s_a - 1)
    labels_a = np.where(is_entity, entity_type, 0)
    attribute = rng.integers(0, 2, size=total)

    features = (
        label_means[labels_a]
        + topic_means[token_topic]
        + rng.normal(0.0, spec.feature_noise, size=(total, d))
    )
    s_b = spec.n_labels_b
    flip = rng.random(total) < spec.noise
    if spec.scenario == "complementary":
        labels_b = labels_a % s_b
        labels_b = np.where(flip, rng.integers(0, s_b, size=total), labels_b)
    elif spec.scenario == "hierarchical":
        features = features + np.where(labels_a[:, None] != 0, attr_means[attribute], 0.0)
        relation = 1 + ((labels_a - 1) * 2 + attribute) % (s_b - 1)
        # noise only re-draws the relation, never un-nulls an O token
        noisy = 1 + rng.integers(0, s_b - 1, size=total)
        labels_b = np.where(labels_a == 0, 0, np.where(flip, noisy, relation))
    else:
        offsets = np.concatenate(([0], np.cumsum(lengths)))
        labels_b = np.zeros(n, dtype=int)
        for i in range(n):
            ents = labels_a[offsets[i]:offsets[i + 1]]
            ents = ents[ents != 0]
            if ents.size:
                counts = np.bincount(ents, minlength=s_a)
                labels_b[i] = int(counts.argmax())
        sent_flip = rng.random(n) < spec.noise
        labels_b = np.where(sent_flip, rng.integers(0, s_b, size=n), labels_b)

    order = rng.permutation(n)
    train = np.sort(order[:spec.n_train])
    dev = np.sort(order[spec.n_train:spec.n_train + spec.n_dev])
    test = np.sort(order[spec.n_train + spec.n_dev:])
    return SyntheticCorpus(spec, features, labels_a.astype(int), labels_b.astype(int),
                           lengths.astype(int), train, dev, test)
