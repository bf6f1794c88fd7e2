import math

import numpy as np
import pytest

from mtal.errors import ValidationError
from mtal.simlab.metrics import (
    accuracy,
    evaluate,
    f1_counts,
    geometric_mean,
    macro_f1,
    micro_f1,
    paired_t_test,
)

from oracles import t_quantile_975_df9


def test_micro_f1_counts():
    gold = [0, 1, 1, 2, 0]
    pred = [0, 1, 2, 2, 1]
    assert f1_counts(pred, gold) == (2, 2, 1)
    assert micro_f1(pred, gold) == pytest.approx(4 / 7)
    assert micro_f1([0, 0], [0, 0]) == 1.0


def test_macro_f1():
    gold = [0, 1, 1, 2, 0]
    pred = [0, 1, 2, 2, 1]
    # label 1: tp 1 fp 1 fn 1 -> 0.5 ; label 2: tp 1 fp 1 fn 0 -> 2/3
    assert macro_f1(pred, gold) == pytest.approx((0.5 + 2 / 3) / 2)
    assert macro_f1([0], [0]) == 1.0


def test_evaluate_dispatch():
    assert evaluate([1, 2], [1, 3], kind="sentence") == 0.5
    assert evaluate([1, 2], [1, 2], average="macro") == 1.0
    with pytest.raises(ValidationError):
        evaluate([1], [1], kind="span")
    with pytest.raises(ValidationError):
        accuracy([1], [1, 2])


def test_geometric_mean():
    assert geometric_mean([0.25, 1.0]) == pytest.approx(0.5)
    assert geometric_mean([0.5, 0.0]) == 0.0


def test_t_test_reference_critical_value():
    # mean / (sd / sqrt n) is set to the two-sided 5% critical value at 9 df
    rng = np.random.default_rng(0)
    e = rng.normal(size=10)
    e = (e - e.mean()) / e.std(ddof=1)
    c = t_quantile_975_df9() / math.sqrt(10)
    t, p = paired_t_test(c + e, np.zeros(10))
    assert t == pytest.approx(t_quantile_975_df9(), abs=1e-9)
    assert p == pytest.approx(0.05, abs=1e-3)


def test_t_test_is_antisymmetric_and_handles_constant_differences():
    a = np.array([0.5, 0.7, 0.6, 0.9])
    b = np.array([0.4, 0.6, 0.65, 0.7])
    t1, p1 = paired_t_test(a, b)
    t2, p2 = paired_t_test(b, a)
    assert t1 == pytest.approx(-t2) and p1 == pytest.approx(p2)
    assert paired_t_test(a, a) == (0.0, 1.0)
    t, p = paired_t_test(a + 0.1, a)
    assert p == 0.0 and t > 0
    with pytest.raises(ValidationError):
        paired_t_test([1.0], [2.0])
