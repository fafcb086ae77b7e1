"""Eight order-flow factors over four lookback windows (32 features).

A lookback window ``(d1, d2)`` anchored at ``T`` holds the records with
``T - d2 < t <= T - d1``. Ratio factors evaluate to 0 on empty windows or
zero denominators instead of NaN.

Column order is factor-major: all windows of ``VolumeAll``, then all windows
of ``VolumeMax`` and so on, following :data:`FACTOR_NAMES`.

Sign convention of ``PastReturn``: it is ``1 - mean(trade price) / latest mid``,
which is *positive* when trades printed below the latest mid, i.e. it is
(approximately) the negative of the usual return when prices rise.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._backend import kernels
from .market_data import TickSeries

FACTOR_NAMES = (
    "VolumeAll", "VolumeMax", "Lambda", "LobImbalance",
    "TxnImbalance", "PastReturn", "TurnOver", "QuotedSpread",
)

DEFAULT_WINDOWS = ((0.0, 2.5), (2.5, 6.5), (6.5, 12.5), (12.5, 25.0))


def _ms(seconds: float) -> int:
    return int(round(seconds * 1000))


@dataclass(frozen=True)
class LookbackSpec:
    windows: tuple = DEFAULT_WINDOWS

    def __post_init__(self):
        windows = tuple((float(a), float(b)) for a, b in self.windows)
        if not windows:
            raise ValueError("at least one lookback window is required")
        for a, b in windows:
            if not 0 <= a < b:
                raise ValueError(f"invalid lookback window ({a}, {b})")
        object.__setattr__(self, "windows", windows)

    @property
    def max_lookback_s(self) -> float:
        return max(b for _, b in self.windows)

    @property
    def widest(self) -> int:
        """Index of the window with the longest span."""
        spans = [b - a for a, b in self.windows]
        return int(np.argmax(spans))

    def column_names(self) -> list[str]:
        return [f"f{i + 1:02d}" for i in range(len(FACTOR_NAMES) * len(self.windows))]

    def describe_columns(self) -> list[str]:
        return [f"{name}[{a:g},{b:g}]" for name in FACTOR_NAMES
                for a, b in self.windows]


@dataclass(frozen=True)
class FeatureRow:
    anchor_t: int
    values: tuple
    valid: bool


@dataclass(frozen=True)
class FeatureMatrix:
    """Features for many anchors; iterating yields :class:`FeatureRow`."""

    anchor_t: np.ndarray
    values: np.ndarray
    valid: np.ndarray
    spec: LookbackSpec

    def __len__(self):
        return len(self.anchor_t)

    def __iter__(self):
        for i in range(len(self)):
            yield FeatureRow(int(self.anchor_t[i]),
                             tuple(float(v) for v in self.values[i]),
                             bool(self.valid[i]))

    def __getitem__(self, i) -> FeatureRow:
        return FeatureRow(int(self.anchor_t[i]),
                          tuple(float(v) for v in self.values[i]),
                          bool(self.valid[i]))


class ContractError(ValueError):
    """A precondition of a feature computation was violated."""


def lookback_view(series: TickSeries, T: int, d1: float, d2: float) -> TickSeries:
    """Records with ``T - d2 < t <= T - d1`` (times in ms, spans in seconds)."""
    if not d1 < d2:
        raise ContractError("lookback requires d1 < d2")
    lo = np.searchsorted(series.t_ms, T - _ms(d2), side="right")
    hi = np.searchsorted(series.t_ms, T - _ms(d1), side="right")
    return series[lo:hi]


def lee_ready_sign(trade_px: float, prevailing_mid: float,
                   last_px_change_sign: int) -> int:
    """Quote rule against the mid, tick test at the mid, +1 as last resort."""
    if trade_px > prevailing_mid:
        return 1
    if trade_px < prevailing_mid:
        return -1
    if last_px_change_sign < 0:
        return -1
    return 1


def trade_signs(series: TickSeries) -> np.ndarray:
    """Lee-Ready sign per record (0 for records without a trade).

    The prevailing mid is the same snapshot's mid. The tick test uses the
    direction of the last change in trade price over the whole series.
    """
    px = series.trade_px
    mid = series.mid
    out = np.zeros(len(series))
    last_change = 0
    prev_px = None
    for k in np.nonzero(series.is_trade)[0]:
        p = px[k]
        if prev_px is not None and p != prev_px:
            last_change = 1 if p > prev_px else -1
        prev_px = p
        out[k] = lee_ready_sign(p, mid[k], last_change)
    return out


def _view_signs(view: TickSeries, signs) -> np.ndarray:
    signs = np.asarray(signs, dtype=np.float64)
    n_trades = int(view.is_trade.sum())
    if signs.shape != (n_trades,):
        raise ContractError(
            f"expected one sign per trade ({n_trades}), got {signs.size}")
    return signs


def volume_all(view: TickSeries) -> float:
    return float(view.interval_volume.sum())


def volume_max(view: TickSeries) -> float:
    v = view.interval_volume
    return float(v.max()) if v.size and v.max() > 0 else 0.0


def lambda_factor(view: TickSeries) -> float:
    total = volume_all(view)
    trades = np.nonzero(view.is_trade)[0]
    if total == 0 or trades.size == 0:
        return 0.0
    mid = view.mid
    return float((mid[trades[-1]] - mid[trades[0]]) / total)


def lob_imbalance(view: TickSeries) -> float:
    a = view.ask_sz.astype(float)
    b = view.bid_sz.astype(float)
    depth = a + b
    ok = depth > 0
    if not ok.any():
        return 0.0
    return float(((a[ok] - b[ok]) / depth[ok]).mean())


def txn_imbalance(view: TickSeries, signs) -> float:
    signs = _view_signs(view, signs)
    total = volume_all(view)
    if total == 0:
        return 0.0
    vol = view.interval_volume[view.is_trade].astype(float)
    return float((vol * signs).sum() / total)


def past_return(view: TickSeries) -> float:
    trades = np.nonzero(view.is_trade)[0]
    if trades.size == 0:
        return 0.0
    return float(1.0 - view.trade_px[trades].mean() / view.mid[trades[-1]])


def turnover_factor(view: TickSeries, open_interest_at_T: float) -> float:
    if not open_interest_at_T > 0:
        raise ContractError("open interest must be positive")
    return volume_all(view) / float(open_interest_at_T)


def quoted_spread(view: TickSeries) -> float:
    if len(view) == 0:
        return 0.0
    return float(((view.ask_px - view.bid_px) / (view.bid_px + view.ask_px) * 2.0).mean())


def build_feature_matrix(series: TickSeries, anchors, spec: LookbackSpec = LookbackSpec(),
                         signs=None) -> FeatureMatrix:
    """Evaluate all factors at each anchor (ms).

    Each anchor needs ``spec.max_lookback_s`` of history inside the session
    and a record at or before it; otherwise :class:`ContractError`. Rows whose
    widest window holds no records are returned with ``valid=False``.
    """
    anchors = np.asarray(anchors, dtype=np.int64).reshape(-1)
    n_cols = len(FACTOR_NAMES) * len(spec.windows)
    if anchors.size == 0:
        return FeatureMatrix(anchors, np.zeros((0, n_cols)),
                             np.zeros(0, dtype=bool), spec)
    need = _ms(spec.max_lookback_s)
    short = anchors - need < series.session_open
    if short.any() or len(series) == 0 or anchors.min() < series.t_ms[0]:
        bad = anchors[short][0] if short.any() else anchors.min()
        raise ContractError(
            f"anchor {int(bad)} lacks {spec.max_lookback_s} s of history")
    if signs is None:
        signs = trade_signs(series)
    bid = series.bid_px.astype(float)
    ask = series.ask_px.astype(float)
    rel_spread = (ask - bid) / (bid + ask) * 2.0
    d1 = np.array([_ms(a) for a, _ in spec.windows], dtype=np.int64)
    d2 = np.array([_ms(b) for _, b in spec.windows], dtype=np.int64)
    values, counts = kernels.feature_block(
        series.t_ms, series.interval_volume.astype(float), series.mid,
        series.trade_px, series.ask_sz.astype(float),
        series.bid_sz.astype(float), rel_spread, signs,
        series.open_interest.astype(float), anchors, d1, d2)
    valid = counts[:, spec.widest] > 0
    valid &= np.isfinite(values).all(axis=1)
    return FeatureMatrix(anchors, values, valid, spec)


def feature_row_reference(series: TickSeries, T: int, spec: LookbackSpec = LookbackSpec(),
                          signs=None) -> np.ndarray:
    """Compose the per-factor functions for one anchor (slow, for checking)."""
    if signs is None:
        signs = trade_signs(series)
    k = np.searchsorted(series.t_ms, T, side="right") - 1
    oi_T = float(series.open_interest[k])
    per_window = []
    for d1, d2 in spec.windows:
        lo = np.searchsorted(series.t_ms, T - _ms(d2), side="right")
        hi = np.searchsorted(series.t_ms, T - _ms(d1), side="right")
        view = series[lo:hi]
        view_signs = signs[lo:hi][view.is_trade]
        per_window.append((
            volume_all(view), volume_max(view), lambda_factor(view),
            lob_imbalance(view), txn_imbalance(view, view_signs),
            past_return(view), turnover_factor(view, oi_T), quoted_spread(view),
        ))
    return np.array(per_window).T.reshape(-1)


def write_features(matrix: FeatureMatrix, path, extra=None) -> None:
    """Write ``anchor_t_ms,valid,f01..fNN`` plus optional extra columns."""
    extra = extra or {}
    header = ["anchor_t_ms", "valid", *matrix.spec.column_names(), *extra]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(matrix)):
            w.writerow([int(matrix.anchor_t[i]), int(bool(matrix.valid[i])),
                        *(repr(float(v)) for v in matrix.values[i]),
                        *(_cell(col[i]) for col in extra.values())])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(int(v)) if isinstance(v, (bool, np.bool_, np.integer, int)) else str(v)


def read_features(path, spec: LookbackSpec = LookbackSpec()):
    """Read a feature CSV; returns ``(FeatureMatrix, extra_columns_dict)``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n_f = len(spec.column_names())
    if header[:2 + n_f] != ["anchor_t_ms", "valid", *spec.column_names()]:
        raise ValueError(f"{path}: unexpected feature header")
    anchors = np.array([int(r[0]) for r in body], dtype=np.int64)
    valid = np.array([r[1] == "1" for r in body], dtype=bool)
    values = np.array([[float(x) for x in r[2:2 + n_f]] for r in body]).reshape(-1, n_f)
    extra = {name: [r[2 + n_f + j] for r in body]
             for j, name in enumerate(header[2 + n_f:])}
    return FeatureMatrix(anchors, values, valid, spec), extra
