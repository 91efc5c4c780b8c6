import math
import warnings

import numpy as np
import pytest
from scipy import stats

from crowdagg.core.errors import ConstantInput, DegenerateSample, LengthMismatch
from crowdagg.domain.schemas import TestName
from crowdagg.services.stat_tests import (
    brunner_munzel_test,
    f_cdf,
    f_sf,
    f_test_two_sided,
    kendall_tau,
    pearson,
    spearman,
    t_two_sided_p,
    welch_t_test,
)


def brute_midranks(x):
    """Average 1-based position of each value among the sorted sample."""
    order = sorted(x)
    return [sum(k + 1 for k, v in enumerate(order) if v == xi) / order.count(xi) for xi in x]


def brute_pearson(x, y):
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


# distribution tails

@pytest.mark.parametrize("x, d1, d2", [(0.3, 3, 7), (1.0, 5, 5), (2.5, 2, 40), (10.0, 12, 3)])
def test_f_tails_match_scipy(x, d1, d2):
    assert f_cdf(x, d1, d2) == pytest.approx(stats.f.cdf(x, d1, d2), rel=1e-10)
    assert f_sf(x, d1, d2) == pytest.approx(stats.f.sf(x, d1, d2), rel=1e-10)


@pytest.mark.parametrize("t, df", [(0.0, 3), (1.5, 4.2), (-2.7, 11), (6.0, 30)])
def test_t_tail_matches_scipy(t, df):
    assert t_two_sided_p(t, df) == pytest.approx(2 * stats.t.sf(abs(t), df), rel=1e-10, abs=1e-300)


# F test

def test_f_identical_samples():
    res = f_test_two_sided([1, 2, 3, 5], [1, 2, 3, 5])
    assert res.statistic == 1.0
    assert res.p_value == pytest.approx(1.0)
    assert res.df == (3.0, 3.0)
    assert res.test == TestName.FTwoSided


def test_f_against_scipy_and_symmetry():
    rng = np.random.default_rng(0)
    a, b = rng.normal(0, 1, 15), rng.normal(0, 2, 12)
    res = f_test_two_sided(a, b)
    stat = np.var(a, ddof=1) / np.var(b, ddof=1)
    expected = 2 * min(stats.f.cdf(stat, 14, 11), stats.f.sf(stat, 14, 11))
    assert res.statistic == pytest.approx(stat)
    assert res.p_value == pytest.approx(expected, rel=1e-9)
    assert f_test_two_sided(b, a).p_value == pytest.approx(res.p_value, rel=1e-9)


def test_f_degenerate():
    with pytest.raises(DegenerateSample):
        f_test_two_sided([2, 2, 2], [1, 2, 3])
    with pytest.raises(DegenerateSample):
        f_test_two_sided([1], [1, 2, 3])


# Welch

def test_welch_textbook_example():
    res = welch_t_test([1, 2, 3], [4, 5, 6])
    assert res.statistic == pytest.approx(-3.6742, abs=1e-4)
    assert res.df == pytest.approx(4.0)
    assert res.p_value == pytest.approx(0.0214, abs=1e-3)


def test_welch_matches_scipy_and_scale_invariance():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.normal(0, 1, 9), rng.normal(0.5, 3, 14)
        res = welch_t_test(a, b)
        ref = stats.ttest_ind(a, b, equal_var=False)
        assert res.statistic == pytest.approx(ref.statistic, rel=1e-10)
        assert res.p_value == pytest.approx(ref.pvalue, rel=1e-8)
    scaled = welch_t_test(10 * a, 10 * b)
    assert scaled.statistic == pytest.approx(res.statistic, rel=1e-12)
    assert scaled.p_value == pytest.approx(res.p_value, rel=1e-10)


def test_welch_degenerate():
    with pytest.raises(DegenerateSample):
        welch_t_test([1, 1], [2, 2])


# Brunner-Munzel

def test_brunner_munzel_matches_scipy():
    rng = np.random.default_rng(2)
    for _ in range(50):
        nx, ny = rng.integers(10, 30, size=2)
        a = rng.integers(0, 8, nx).astype(float)
        b = rng.integers(1, 9, ny).astype(float)
        res = brunner_munzel_test(a, b)
        ref = stats.brunnermunzel(a, b)
        assert res.statistic == pytest.approx(ref.statistic, abs=1e-6)
        assert res.p_value == pytest.approx(ref.pvalue, abs=1e-6)


def test_brunner_munzel_shifted_copies():
    a = np.tile(np.arange(1, 11), 10).astype(float)
    b = a + 5
    res = brunner_munzel_test(a, b)
    ref = stats.brunnermunzel(a, b)
    assert res.statistic == pytest.approx(ref.statistic, abs=1e-6)
    assert res.p_value == pytest.approx(ref.pvalue, abs=1e-6)
    assert res.effect > 0.5


def test_brunner_munzel_identical_and_antisymmetric():
    a = [1, 2, 2, 3, 4, 5, 5, 6, 7, 8]
    same = brunner_munzel_test(a, list(a))
    assert same.effect == 0.5
    assert same.statistic == pytest.approx(0.0, abs=1e-12)
    assert same.p_value == pytest.approx(1.0)

    b = [3, 4, 4, 6, 7, 8, 9, 9, 10, 12]
    ab, ba = brunner_munzel_test(a, b), brunner_munzel_test(b, a)
    assert ab.statistic == pytest.approx(-ba.statistic, rel=1e-12)
    assert ab.p_value == pytest.approx(ba.p_value, rel=1e-12)


def test_brunner_munzel_degenerate_rank_variance():
    tied = brunner_munzel_test([3.0] * 10, [3.0] * 12)
    assert tied.degenerate and tied.p_value == 1.0 and tied.statistic == 0.0
    separated = brunner_munzel_test([1.0] * 10, [2.0] * 10)
    assert separated.degenerate and separated.p_value == 0.0
    assert separated.statistic == math.inf and separated.effect == 1.0


def test_brunner_munzel_warns_on_small_samples():
    with pytest.warns(RuntimeWarning):
        brunner_munzel_test([1, 2, 3], [2, 3, 4, 5])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        brunner_munzel_test(list(range(10)), list(range(3, 13)))


def test_all_p_values_in_unit_interval():
    rng = np.random.default_rng(3)
    for _ in range(30):
        a, b = rng.normal(size=12), rng.normal(1, 2, size=15)
        for fn in (f_test_two_sided, welch_t_test, brunner_munzel_test):
            assert 0.0 <= fn(a, b).p_value <= 1.0


# correlations

def test_spearman_examples():
    assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    a, b = [1, 2, 2, 4], [1, 3, 2, 4]
    assert spearman(a, b) == pytest.approx(brute_pearson(brute_midranks(a), brute_midranks(b)), abs=1e-12)


def test_spearman_midrank_oracle_with_ties():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n = int(rng.integers(3, 25))
        a = rng.integers(1, 6, n).tolist()
        b = rng.integers(1, 6, n).tolist()
        if len(set(a)) < 2 or len(set(b)) < 2:
            continue
        expected = brute_pearson(brute_midranks(a), brute_midranks(b))
        assert spearman(a, b) == pytest.approx(expected, abs=1e-12)
        assert spearman(a, b) == pytest.approx(stats.spearmanr(a, b)[0], abs=1e-12)


def test_spearman_rank_invariance():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=30), rng.normal(size=30)
    assert spearman(np.exp(a), b) == pytest.approx(spearman(a, b), abs=1e-12)
    assert spearman(a ** 3 + 2, b) == pytest.approx(spearman(a, b), abs=1e-12)


def test_pearson_and_kendall_match_scipy():
    rng = np.random.default_rng(6)
    a, b = rng.normal(size=20), rng.normal(size=20)
    assert pearson(a, b) == pytest.approx(stats.pearsonr(a, b)[0], abs=1e-12)
    assert kendall_tau(a, b) == pytest.approx(stats.kendalltau(a, b)[0], abs=1e-12)


def test_correlation_guards():
    with pytest.raises(ConstantInput):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ConstantInput):
        pearson([1], [2])
    with pytest.raises(LengthMismatch):
        spearman([1, 2, 3], [1, 2])
