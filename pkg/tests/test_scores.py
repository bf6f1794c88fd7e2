import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import softmax

from mtal.errors import ValidationError
from mtal.scores import (
    CalibrationSample,
    dropout_agreement,
    dropout_agreements,
    fit_and_apply_temperature,
    label_smoothing_targets,
    overconfidence_error,
    sentence_accuracy,
    sentence_entropy_confidence,
    smoothed_target_matrix,
    temperature_nll,
    token_entropy_confidence,
    token_entropy_confidences,
)

from oracles import entropy_confidence_loop


def random_rows(rng, m, s):
    return rng.dirichlet(np.ones(s), size=m)


def test_uniform_and_one_hot_extremes():
    assert token_entropy_confidence(np.full((4, 5), 0.2)) == pytest.approx(0.0, abs=1e-12)
    assert token_entropy_confidence(np.eye(3)) == pytest.approx(1.0, abs=1e-12)
    assert sentence_entropy_confidence(np.array([0.5, 0.5])) == pytest.approx(0.0, abs=1e-12)
    assert sentence_entropy_confidence(np.array([0.0, 1.0, 0.0])) == 1.0


def test_matches_loop_reference():
    rng = np.random.default_rng(3)
    for m, s in [(1, 2), (5, 3), (12, 9)]:
        rows = random_rows(rng, m, s)
        assert token_entropy_confidence(rows) == pytest.approx(entropy_confidence_loop(rows.tolist()), abs=1e-12)


def test_vectorized_matches_per_sentence():
    rng = np.random.default_rng(4)
    lengths = np.array([3, 1, 6, 2])
    rows = random_rows(rng, lengths.sum(), 4)
    batch = token_entropy_confidences(rows, lengths)
    starts = np.concatenate(([0], np.cumsum(lengths)))
    single = [token_entropy_confidence(rows[a:b]) for a, b in zip(starts[:-1], starts[1:])]
    np.testing.assert_allclose(batch, single, atol=1e-12)


def test_rows_not_summing_to_one_are_rejected():
    with pytest.raises(ValidationError, match="row 1"):
        token_entropy_confidence([[0.5, 0.5], [0.5, 0.49]])
    with pytest.raises(ValidationError):
        token_entropy_confidence([[1.0]])
    with pytest.raises(ValidationError):
        token_entropy_confidence([[1.2, -0.2]])
    # drift within tolerance is accepted as is
    token_entropy_confidence([[0.5, 0.5 + 5e-10]])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_entropy_confidence_in_unit_interval(m, s, seed):
    rows = random_rows(np.random.default_rng(seed), m, s)
    c = token_entropy_confidence(rows)
    assert 0.0 <= c <= 1.0


def test_dropout_agreement_values():
    assert dropout_agreement([[1, 2, 3]] * 4) == 1.0
    # one column, 3 passes: labels (0, 0, 1) -> ordered agreeing pairs 2 of 6
    assert dropout_agreement([[0], [0], [1]]) == pytest.approx(1 / 3)
    # all different labels: no agreeing pair
    assert dropout_agreement([[0], [1], [2]]) == 0.0


def test_dropout_agreement_pairwise_definition():
    rng = np.random.default_rng(5)
    preds = rng.integers(0, 3, size=(6, 7))
    k = preds.shape[0]
    pairs = [(a, b) for a in range(k) for b in range(k) if a != b]
    expected = np.mean([np.mean(preds[a] == preds[b]) for a, b in pairs])
    assert dropout_agreement(preds) == pytest.approx(expected, abs=1e-12)


def test_dropout_agreements_vectorized():
    rng = np.random.default_rng(6)
    lengths = np.array([2, 5, 1])
    preds = rng.integers(0, 4, size=(5, lengths.sum()))
    starts = np.concatenate(([0], np.cumsum(lengths)))
    single = [dropout_agreement(preds[:, a:b]) for a, b in zip(starts[:-1], starts[1:])]
    np.testing.assert_allclose(dropout_agreements(preds, lengths), single, atol=1e-12)


def test_dropout_agreement_rejects_bad_ensembles():
    with pytest.raises(ValidationError):
        dropout_agreement([[1, 2]])
    with pytest.raises(ValidationError):
        dropout_agreement([[1, 2], [1]])


def test_label_smoothing_targets():
    t = label_smoothing_targets(2, 4, 0.2)
    np.testing.assert_allclose(t, [0.05, 0.05, 0.85, 0.05])
    assert t.sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(label_smoothing_targets(0, 3, 0.0), [1, 0, 0])
    m = smoothed_target_matrix([2, 0], 4, 0.2)
    np.testing.assert_allclose(m[0], t)
    with pytest.raises(ValidationError):
        label_smoothing_targets(4, 4, 0.1)
    with pytest.raises(ValidationError):
        label_smoothing_targets(0, 4, 1.0)


def test_temperature_fit_recovers_scale():
    rng = np.random.default_rng(7)
    true_logits = rng.normal(0, 2, size=(4000, 4))
    gold = np.array([rng.choice(4, p=p) for p in softmax(true_logits, axis=1)])
    # an overconfident model: logits scaled up 3x
    t, probs = fit_and_apply_temperature(3 * true_logits, gold)
    assert 2.4 < t < 3.7
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    assert temperature_nll(3 * true_logits, gold, t) < temperature_nll(3 * true_logits, gold, 1.0)


def test_temperature_tie_prefers_one():
    logits = np.zeros((3, 2))
    t, probs = fit_and_apply_temperature(logits, [0, 1, 0], grid=[0.5, 1.0, 2.0])
    assert t == 1.0
    t, _ = fit_and_apply_temperature(logits, [0, 1, 0], grid=[0.5, 2.0])
    assert t == 0.5


def test_overconfidence_error():
    assert overconfidence_error([(0.3, 0.5), (0.2, 0.2), (0.0, 1.0)]) == 0.0
    samples = [CalibrationSample(0.9, 0.5), CalibrationSample(0.4, 0.6)]
    assert overconfidence_error(samples) == pytest.approx(0.9 * 0.4 / 2)
    with pytest.raises(ValidationError):
        overconfidence_error([])
    with pytest.raises(ValidationError):
        CalibrationSample(1.2, 0.0)


def test_sentence_accuracy():
    assert sentence_accuracy([1, 2, 3], [1, 0, 3]) == pytest.approx(2 / 3)
    with pytest.raises(ValidationError):
        sentence_accuracy([1], [1, 2])


def test_entropy_of_two_label_half_split_matches_log():
    p = 0.25
    h = -(p * math.log(p) + (1 - p) * math.log(1 - p)) / math.log(2)
    assert sentence_entropy_confidence(np.array([p, 1 - p])) == pytest.approx(1 - h, abs=1e-12)
