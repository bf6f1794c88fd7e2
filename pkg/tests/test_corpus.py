import numpy as np
import pytest

from mtal.errors import ValidationError
from mtal.simlab.corpus import SCENARIOS, CorpusSpec, generate_corpus

from oracles import nonnull_counts


@pytest.fixture(scope="module", params=SCENARIOS)
def corpus(request):
    return generate_corpus(scenario=request.param, n_train=120, n_dev=30, n_test=40, seed=5)


def test_splits_partition_sentences(corpus):
    every = np.concatenate([corpus.train, corpus.dev, corpus.test])
    assert sorted(every.tolist()) == list(range(corpus.spec.n_sentences))
    assert corpus.offsets[-1] == corpus.features.shape[0] == corpus.labels_a.size


def test_label_ranges(corpus):
    s_a, s_b = corpus.n_labels
    assert corpus.labels_a.min() >= 0 and corpus.labels_a.max() < s_a
    assert corpus.labels_b.min() >= 0 and corpus.labels_b.max() < s_b
    expected = corpus.spec.n_sentences if corpus.kinds[1] == "sentence" else corpus.labels_a.size
    assert corpus.labels_b.size == expected


def test_entity_counts(corpus):
    assert corpus.nt.tolist() == nonnull_counts(corpus.labels_a.tolist(), corpus.lengths.tolist())
    assert np.all(corpus.m == corpus.lengths)
    assert np.all((corpus.spec.min_len <= corpus.m) & (corpus.m <= corpus.spec.max_len))


def test_batch_shapes(corpus):
    ids = corpus.train[:7]
    batch = corpus.batch(ids)
    assert batch.features.shape == (corpus.lengths[ids].sum(), corpus.spec.d)
    assert batch.gold[0].size == batch.features.shape[0]
    assert batch.gold[1].size == batch.task_lengths(1).sum()


def test_hierarchical_nulls_align():
    c = generate_corpus(scenario="hierarchical", n_train=80, n_dev=10, n_test=10, seed=2)
    np.testing.assert_array_equal(c.labels_a == 0, c.labels_b == 0)


def test_deterministic_by_seed():
    a = generate_corpus(n_train=50, n_dev=10, n_test=10, seed=3)
    b = generate_corpus(n_train=50, n_dev=10, n_test=10, seed=3)
    c = generate_corpus(n_train=50, n_dev=10, n_test=10, seed=4)
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.lengths, c.lengths) or not np.array_equal(a.features, c.features)


def test_spec_validation():
    with pytest.raises(ValidationError):
        CorpusSpec(scenario="parallel")
    with pytest.raises(ValidationError):
        CorpusSpec(min_len=5, max_len=3)
    assert CorpusSpec(scenario="granularity").kind_b == "sentence"
