import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtal.errors import ValidationError
from mtal.fusion import (
    RRFParams,
    TaskRanking,
    ind_select,
    rrf_order,
    rrf_scores,
    rrf_select,
    split_quotas,
)
from mtal.strategies import ConfidenceMatrix, least_confident_order


def fixture():
    # task 0 ranks 3,1,4,2 ; task 1 ranks 2,3,4,1 (least confident first)
    return ConfidenceMatrix.from_scores(
        [[0.2, 0.9], [0.8, 0.1], [0.1, 0.3], [0.4, 0.6]], ids=[1, 2, 3, 4]
    )


def test_rrf_scores_by_hand():
    scores = rrf_scores([TaskRanking((3, 1, 4, 2)), TaskRanking((2, 3, 4, 1))])
    assert scores[3] == pytest.approx(1 / 61 + 1 / 62, abs=1e-15)
    assert scores[1] == pytest.approx(1 / 62 + 1 / 64, abs=1e-15)
    assert scores[4] == pytest.approx(2 / 63, abs=1e-15)
    # 1/62 + 1/64 = 0.0317540... edges out 2/63 = 0.0317460...
    assert rrf_order(scores) == [3, 2, 1, 4]


def test_rrf_select_records_scores():
    result = rrf_select(fixture(), 2)
    assert result.ids == [3, 2]
    assert result.extras["rrf_scores"][2] == pytest.approx(1 / 64 + 1 / 61)


def test_rrf_weights_and_k():
    rankings = [TaskRanking((1, 2)), TaskRanking((2, 1))]
    scores = rrf_scores(rankings, RRFParams(k=1, weights=(2.0, 1.0)))
    assert scores == {1: 2 / 2 + 1 / 3, 2: 2 / 3 + 1 / 2}
    with pytest.raises(ValidationError):
        RRFParams(k=0)
    with pytest.raises(ValidationError):
        rrf_scores([TaskRanking((1, 2)), TaskRanking((1, 3))])
    with pytest.raises(ValidationError):
        TaskRanking((1, 1))


def test_rrf_ties_by_id():
    assert rrf_order({5: 0.1, 2: 0.1, 9: 0.2}) == [9, 2, 5]


def test_split_quotas():
    assert split_quotas(10, [0.5, 0.5]) == [5, 5]
    assert split_quotas(11, [0.5, 0.5]) == [6, 5]
    assert split_quotas(10, [0.7, 0.3]) == [7, 3]
    assert split_quotas(5, [0.0, 1.0]) == [0, 5]
    assert split_quotas(7, [1 / 3] * 3) == [3, 2, 2]
    with pytest.raises(ValidationError):
        split_quotas(3, [0.5, 0.6])


def test_ind_round_robin():
    cm = fixture()
    # task 0 takes 3, task 1 takes 2, task 0 takes 1, task 1 takes 4
    assert ind_select(cm, 4).ids == [3, 2, 1, 4]
    # a task skips its candidate already claimed by the other task
    cm2 = ConfidenceMatrix.from_scores([[0.1, 0.1], [0.2, 0.2], [0.3, 0.3]])
    assert ind_select(cm2, 2).ids == [0, 1]
    assert ind_select(cm, 3, split=[0.0, 1.0]).ids == least_confident_order(cm.column(1), cm.ids)[:3]


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 30).flatmap(lambda n: st.tuples(
        st.lists(st.lists(st.floats(0, 1), min_size=3, max_size=3), min_size=n, max_size=n),
        st.integers(0, n),
    ))
)
def test_ind_meets_quotas(data):
    rows, n = data
    cm = ConfidenceMatrix.from_scores(rows)
    result = ind_select(cm, n, [0.5, 0.25, 0.25])
    assert len(result.ids) == len(set(result.ids)) == n


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.floats(0, 1), min_size=2, max_size=2), min_size=1, max_size=40))
def test_rrf_bounded_and_total(rows):
    cm = ConfidenceMatrix.from_scores(rows)
    result = rrf_select(cm, len(rows))
    assert sorted(result.ids) == list(range(len(rows)))
    values = np.array(list(result.extras["rrf_scores"].values()))
    assert values.max() <= 2 / 61 + 1e-15
    assert np.all(np.diff(values) <= 0)
