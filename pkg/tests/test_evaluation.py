import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from muhf.evaluation import (ConfusionMatrix, ShortRule, Side, bacc, beta_from_counts,
                             compounded, confusion, f_beta, f_beta_from, long_strategy_returns,
                             metric_report, precision, recall, short_strategy_returns)

returns = st.lists(st.floats(-0.5, 0.5, allow_nan=False), max_size=60)


def test_confusion_examples():
    assert confusion([1, 1, 0, 0], [1, 1, 0, 0]) == ConfusionMatrix(tn=2, fp=0, fn=0, tp=2)
    assert confusion([1, 0], [0, 0]) == ConfusionMatrix(tn=1, fp=0, fn=1, tp=0)
    with pytest.raises(ValueError):
        confusion([1, 0], [1])
    with pytest.raises(ValueError):
        confusion([2], [1])
    with pytest.raises(ValueError):
        ConfusionMatrix(-1, 0, 0, 0)


def test_confusion_matches_enumeration():
    rng = np.random.default_rng(0)
    t, p = rng.integers(0, 2, 100), rng.integers(0, 2, 100)
    counts = {"tn": 0, "fp": 0, "fn": 0, "tp": 0}
    for a, b in zip(t, p):
        counts[{(0, 0): "tn", (0, 1): "fp", (1, 0): "fn", (1, 1): "tp"}[(a, b)]] += 1
    cm = confusion(t, p)
    assert (cm.tn, cm.fp, cm.fn, cm.tp) == tuple(counts.values())
    assert cm.total == 100


def test_metric_examples():
    assert recall(ConfusionMatrix(tp=7, fn=3)) == 0.7
    assert bacc(ConfusionMatrix(tn=5, tp=5)) == 1.0
    assert bacc(ConfusionMatrix(tn=9, fp=1, fn=3, tp=7)) == pytest.approx(0.8, abs=1e-15)
    assert precision(ConfusionMatrix(fp=1, tp=3)) == 0.75


def test_f_beta_examples():
    assert f_beta_from(0.5, 0.5, 1.0) == 0.5
    assert f_beta_from(1.0, 0.5, 1.0) == pytest.approx(2 / 3, abs=1e-15)
    assert f_beta_from(0.3, 0.8, 1e-6) == pytest.approx(0.8, abs=1e-5)
    assert f_beta_from(0.0, 0.0, 2.0) == 0.0
    with pytest.raises(ValueError):
        f_beta_from(0.5, 0.5, math.inf)
    assert f_beta(ConfusionMatrix(tn=5, fp=1, fn=1, tp=1), 1.0) == 0.5


def test_beta_examples():
    assert beta_from_counts(90, 10) == pytest.approx(math.log(9), abs=1e-15)
    assert beta_from_counts(50, 50) == 0.0
    assert beta_from_counts(95, 5) == pytest.approx(2.944438979, abs=1e-9)
    with pytest.raises(ValueError):
        beta_from_counts(10, 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 500), st.integers(1, 500))
def test_trivial_predictors_have_half_bacc(n_neg, n_pos):
    y = np.r_[np.zeros(n_neg, int), np.ones(n_pos, int)]
    for pred in (np.zeros_like(y), np.ones_like(y)):
        rep = metric_report(confusion(y, pred), beta_from_counts(n_neg, n_pos))
        assert rep.bacc == 0.5


def test_empty_denominators_flagged():
    rep = metric_report(ConfusionMatrix(tn=10), 1.0)
    assert rep.recall == 0 and rep.precision == 0 and rep.f_beta == 0
    assert set(rep.empty_denominators) == {"recall", "precision"}
    assert metric_report(ConfusionMatrix(1, 1, 1, 1), 1.0).empty_denominators == ()


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-6, 1), st.floats(1e-6, 1), st.floats(0, 50))
def test_f_beta_between_precision_and_recall(r, p, beta):
    f = f_beta_from(r, p, beta)
    assert min(p, r) * (1 - 1e-12) <= f <= max(p, r) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50),
       st.floats(0, 10))
def test_metrics_in_unit_interval(tn, fp, fn, tp, beta):
    rep = metric_report(ConfusionMatrix(tn, fp, fn, tp), beta)
    for v in (rep.recall, rep.precision, rep.bacc, rep.f_beta):
        assert 0 <= v <= 1


def test_long_examples():
    rep = long_strategy_returns([0.01, -0.005])
    assert rep.cumulative_return == pytest.approx(0.00495, abs=1e-15)
    assert rep.avg_return_per_trade == pytest.approx(0.002475, abs=1e-15)
    assert rep.side is Side.LONG and rep.n_trades == 2
    empty = long_strategy_returns([])
    assert (empty.n_trades, empty.cumulative_return, empty.avg_return_per_trade) == (0, 0, 0)
    single = long_strategy_returns([0.0123])
    assert single.cumulative_return == single.avg_return_per_trade == 0.0123


def test_short_examples():
    rep = short_strategy_returns([-0.01, -0.005])
    assert rep.cumulative_return == pytest.approx(0.01495, abs=1e-15)
    assert rep.avg_return_per_trade == pytest.approx(0.007475, abs=1e-15)
    empty = short_strategy_returns([])
    assert (empty.n_trades, empty.cumulative_return, empty.avg_return_per_trade) == (0, 0, 0)
    single = short_strategy_returns([-0.01])
    assert single.cumulative_return == pytest.approx(0.01, abs=1e-17)
    assert single.avg_return_per_trade == single.cumulative_return


def test_short_rules_differ_at_second_order():
    r = [-0.01, -0.005]
    lit = short_strategy_returns(r, ShortRule.LITERAL).cumulative_return
    comp = short_strategy_returns(r, ShortRule.COMPOUND).cumulative_return
    assert comp == pytest.approx(1.01 * 1.005 - 1, abs=1e-15)
    assert lit - comp == pytest.approx(-2 * 0.01 * 0.005, abs=1e-15)


def test_inadmissible_returns():
    with pytest.raises(ValueError):
        long_strategy_returns([0.1, -1.0])
    with pytest.raises(ValueError):
        short_strategy_returns([math.nan])


@settings(max_examples=500, deadline=None)
@given(returns, st.sampled_from(list(ShortRule)))
def test_average_times_count_is_cumulative(r, rule):
    for rep in (long_strategy_returns(r), short_strategy_returns(r, rule)):
        assert rep.avg_return_per_trade * rep.n_trades == rep.cumulative_return
        if rep.n_trades:
            assert rep.avg_return_per_trade == rep.cumulative_return / rep.n_trades


def test_zero_returns_give_zero():
    for n in (1, 5):
        assert long_strategy_returns([0.0] * n).cumulative_return == 0
        for rule in ShortRule:
            assert short_strategy_returns([0.0] * n, rule).cumulative_return == 0


def test_compounded_left_to_right():
    assert compounded([0.1, 0.1]) == pytest.approx(0.21, abs=1e-15)
    assert compounded([]) == 0.0
