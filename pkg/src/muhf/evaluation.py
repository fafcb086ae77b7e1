"""Imbalance-aware metrics and long/short strategy returns.

Empty denominators: a recall or precision term whose denominator is zero
evaluates to 0 and is flagged on the :class:`MetricReport`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int = 0
    fp: int = 0
    fn: int = 0
    tp: int = 0

    def __post_init__(self):
        if min(self.tn, self.fp, self.fn, self.tp) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(self.tn + other.tn, self.fp + other.fp,
                               self.fn + other.fn, self.tp + other.tp)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true).astype(np.int64).reshape(-1)
    p = np.asarray(y_pred).astype(np.int64).reshape(-1)
    if t.shape != p.shape:
        raise ValueError("y_true and y_pred differ in length")
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise ValueError("labels must be binary")
    return ConfusionMatrix(
        tn=int(((t == 0) & (p == 0)).sum()), fp=int(((t == 0) & (p == 1)).sum()),
        fn=int(((t == 1) & (p == 0)).sum()), tp=int(((t == 1) & (p == 1)).sum()))


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def recall(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fn)


def precision(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fp)


def specificity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tn, cm.tn + cm.fp)


def bacc(cm: ConfusionMatrix) -> float:
    return (recall(cm) + specificity(cm)) / 2.0


def f_beta(cm: ConfusionMatrix, beta: float) -> float:
    r, p = recall(cm), precision(cm)
    return f_beta_from(r, p, beta)


def f_beta_from(r: float, p: float, beta: float) -> float:
    if not math.isfinite(beta):
        raise ValueError("beta must be finite")
    b2 = beta * beta
    den = r + b2 * p
    if den == 0:
        return 0.0
    return (1 + b2) * r * p / den


def beta_from_counts(m_neg: int, m_pos: int) -> float:
    """``ln(m_neg / m_pos)``."""
    if m_neg <= 0 or m_pos <= 0:
        raise ValueError("class counts must be positive")
    return math.log(m_neg / m_pos)


@dataclass(frozen=True)
class MetricReport:
    recall: float
    precision: float
    bacc: float
    f_beta: float
    beta: float
    counts: ConfusionMatrix
    empty_denominators: tuple = ()


def metric_report(cm: ConfusionMatrix, beta: float) -> MetricReport:
    flags = tuple(name for name, den in (
        ("recall", cm.tp + cm.fn), ("precision", cm.tp + cm.fp),
        ("specificity", cm.tn + cm.fp)) if den == 0)
    return MetricReport(recall(cm), precision(cm), bacc(cm), f_beta(cm, beta),
                        beta, cm, flags)


class Side(str, Enum):
    LONG = "LONG"
    SHORT = "SHORT"


class ShortRule(str, Enum):
    LITERAL = "LITERAL"    # negate the compounded total return
    COMPOUND = "COMPOUND"  # compound the negated per-trade returns


@dataclass(frozen=True)
class StrategyReport:
    side: Side
    n_trades: int
    cumulative_return: float
    avg_return_per_trade: float


def _checked_returns(returns):
    r = np.asarray(returns, dtype=np.float64).reshape(-1)
    if not np.isfinite(r).all():
        raise ValueError("returns must be finite")
    if (r <= -1).any():
        raise ValueError("a per-trade return of -100% or worse is not admissible")
    return r


def compounded(returns) -> float:
    """``prod(1 + r) - 1`` accumulated left to right.

    The excess ``e`` is carried directly (``e <- e + r + e * r``), which keeps
    full precision for small returns and returns ``r`` exactly for one trade.
    """
    acc = 0.0
    for x in returns:
        x = float(x)
        acc = acc + x + acc * x
    return acc


def _report(side, n, cumulative):
    if n == 0:
        return StrategyReport(side, 0, 0.0, 0.0)
    avg = cumulative / n
    # re-derive the total from the average so avg * n reproduces it bit for bit
    return StrategyReport(side, n, avg * n, avg)


def long_strategy_returns(returns) -> StrategyReport:
    r = _checked_returns(returns)
    return _report(Side.LONG, r.size, compounded(r) if r.size else 0.0)


def short_strategy_returns(returns, rule: ShortRule = ShortRule.LITERAL) -> StrategyReport:
    r = _checked_returns(returns)
    if r.size == 0:
        return _report(Side.SHORT, 0, 0.0)
    if ShortRule(rule) is ShortRule.LITERAL:
        cumulative = -compounded(r)
    else:
        cumulative = compounded(-r)
    return _report(Side.SHORT, r.size, cumulative)
