"""Forward short-term average returns and percentile labels."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .market_data import TickSeries


class Direction(str, Enum):
    UP = "UP"
    DOWN = "DOWN"


@dataclass(frozen=True)
class ReturnSample:
    anchor_t: int
    fwd_avg_return: float
    n_fwd_trades: int

    @property
    def usable(self) -> bool:
        return self.n_fwd_trades > 0


@dataclass(frozen=True)
class LabelTask:
    direction: Direction = Direction.UP
    percentile: float | None = None
    horizon_s: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.percentile is None:
            default = 95.0 if self.direction is Direction.UP else 5.0
            object.__setattr__(self, "percentile", default)
        if not 0 < self.percentile < 100:
            raise ValueError("percentile must lie strictly between 0 and 100")
        if self.horizon_s <= 0:
            raise ValueError("horizon_s must be positive")


@dataclass(frozen=True)
class LabelResult:
    labels: np.ndarray
    kept: np.ndarray
    dropped: np.ndarray


def _mid_at(series: TickSeries, T: int) -> float:
    k = np.searchsorted(series.t_ms, T, side="right") - 1
    if k < 0:
        raise ValueError(f"no quote at or before t={T}")
    return float(series.mid[k])


def forward_average_return(series: TickSeries, T: int, horizon_s: float) -> ReturnSample:
    """Mean trade price over ``(T, T + horizon]`` divided by the mid at ``T``, minus 1."""
    p_T = _mid_at(series, T)
    lo = np.searchsorted(series.t_ms, T, side="right")
    hi = np.searchsorted(series.t_ms, T + int(round(horizon_s * 1000)), side="right")
    trade = series.is_trade[lo:hi]
    n = int(trade.sum())
    if n == 0:
        return ReturnSample(int(T), float("nan"), 0)
    avg = series.trade_px[lo:hi][trade].mean()
    return ReturnSample(int(T), float(avg / p_T - 1.0), n)


def forward_returns(series: TickSeries, anchors, horizon_s: float) -> list[ReturnSample]:
    return [forward_average_return(series, int(T), horizon_s) for T in anchors]


def percentile_threshold(returns, q: float) -> float:
    """Nearest-rank percentile: the ``ceil(q * n / 100)``-th smallest value."""
    values = np.sort(np.asarray(returns, dtype=np.float64))
    if values.size == 0:
        raise ValueError("percentile of an empty list")
    if not 0 < q < 100:
        raise ValueError("q must lie strictly between 0 and 100")
    rank = math.ceil(Fraction(str(q)) * values.size / 100)
    return float(values[max(rank, 1) - 1])


def assign_labels(samples, task: LabelTask, threshold: float) -> LabelResult:
    """Label 1 above (UP) or below (DOWN) ``threshold``; unusable samples are dropped."""
    usable = np.array([s.usable for s in samples], dtype=bool)
    r = np.array([s.fwd_avg_return for s in samples], dtype=np.float64)
    kept = np.nonzero(usable)[0]
    dropped = np.nonzero(~usable)[0]
    if task.direction is Direction.UP:
        labels = (r[kept] > threshold).astype(np.int64)
    else:
        labels = (r[kept] < threshold).astype(np.int64)
    return LabelResult(labels, kept, dropped)


def label_returns(returns, direction: Direction, threshold: float) -> np.ndarray:
    """Array form of :func:`assign_labels` for already-usable returns."""
    r = np.asarray(returns, dtype=np.float64)
    if Direction(direction) is Direction.UP:
        return (r > threshold).astype(np.int64)
    return (r < threshold).astype(np.int64)
