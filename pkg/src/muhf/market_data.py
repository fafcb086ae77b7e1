"""Futures snapshot series: CSV ingestion, validation, session trimming, synthesis.

Prices are held as integers in units of ``1 / PRICE_SCALE`` so that CSV
round-trips are exact. Volume is per-interval (contracts traded since the
previous snapshot); convert cumulative feeds with :func:`cumulative_to_interval`
before loading.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

PRICE_DECIMALS = 4
PRICE_SCALE = 10 ** PRICE_DECIMALS

CSV_COLUMNS = (
    "t_ms", "last_px", "interval_volume", "bid_px", "ask_px",
    "bid_sz", "ask_sz", "open_interest",
)

_ARRAY_FIELDS = (
    "t_ms", "last_px", "interval_volume", "bid_px", "ask_px",
    "bid_sz", "ask_sz", "open_interest",
)


class LoadError(ValueError):
    """A tick file could not be parsed."""


class ValidationError(ValueError):
    """A snapshot or series violates its invariants."""


@dataclass(frozen=True)
class MarketSnapshot:
    """One exchange snapshot. Prices are decimal floats."""

    t: int
    last_px: float
    interval_volume: int
    bid_px: float
    ask_px: float
    bid_sz: int
    ask_sz: int
    open_interest: int

    @property
    def mid(self) -> float:
        return (self.bid_px + self.ask_px) / 2.0

    @property
    def is_trade(self) -> bool:
        return self.interval_volume > 0


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TickSeries:
    """Time-ordered snapshots of one instrument over one session.

    Columns are read-only numpy arrays; prices are scaled integers
    (``px / PRICE_SCALE`` gives the decimal price). ``trim_ms`` marks the
    opening and closing spans excluded from use; records lie inside
    ``[active_open, active_close]``.
    """

    instrument: str
    session_open: int
    session_close: int
    t_ms: np.ndarray
    last_px: np.ndarray
    interval_volume: np.ndarray
    bid_px: np.ndarray
    ask_px: np.ndarray
    bid_sz: np.ndarray
    ask_sz: np.ndarray
    open_interest: np.ndarray
    trim_ms: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in _ARRAY_FIELDS:
            object.__setattr__(self, name, _frozen(getattr(self, name), np.int64))
        n = len(self.t_ms)
        for name in _ARRAY_FIELDS:
            if getattr(self, name).shape != (n,):
                raise ValidationError(f"column {name} has wrong length")
        self._validate()

    def _validate(self):
        if self.session_close < self.session_open:
            raise ValidationError("session_close precedes session_open")
        if self.trim_ms < 0 or self.active_close < self.active_open:
            raise ValidationError(f"trim of {self.trim_ms} ms does not fit the session")
        t = self.t_ms
        if len(t) == 0:
            return
        bad = np.nonzero(np.diff(t) <= 0)[0]
        if bad.size:
            raise ValidationError(
                f"record {bad[0] + 1}: timestamp {t[bad[0] + 1]} does not "
                f"strictly increase")
        checks = (
            ((t < self.active_open) | (t > self.active_close),
             "timestamp outside session"),
            (self.bid_px <= 0, "bid_px must be positive"),
            (self.ask_px < self.bid_px, "ask_px below bid_px"),
            (self.last_px <= 0, "last_px must be positive"),
            (self.interval_volume < 0, "negative interval_volume"),
            (self.bid_sz < 0, "negative bid_sz"),
            (self.ask_sz < 0, "negative ask_sz"),
            (self.open_interest <= 0, "open_interest must be positive"),
        )
        for mask, msg in checks:
            idx = np.nonzero(mask)[0]
            if idx.size:
                raise ValidationError(f"record {idx[0]}: {msg}")

    def __len__(self):
        return len(self.t_ms)

    @property
    def active_open(self) -> int:
        return self.session_open + self.trim_ms

    @property
    def active_close(self) -> int:
        return self.session_close - self.trim_ms

    def __getitem__(self, key):
        if isinstance(key, slice):
            return self.replace_records(slice_=key)
        i = int(key)
        return MarketSnapshot(
            t=int(self.t_ms[i]),
            last_px=self.last_px[i] / PRICE_SCALE,
            interval_volume=int(self.interval_volume[i]),
            bid_px=self.bid_px[i] / PRICE_SCALE,
            ask_px=self.ask_px[i] / PRICE_SCALE,
            bid_sz=int(self.bid_sz[i]),
            ask_sz=int(self.ask_sz[i]),
            open_interest=int(self.open_interest[i]),
        )

    @property
    def records(self) -> list[MarketSnapshot]:
        return [self[i] for i in range(len(self))]

    def replace_records(self, slice_=None, mask=None, **bounds) -> TickSeries:
        sel = slice_ if slice_ is not None else mask
        cols = {name: getattr(self, name)[sel] for name in _ARRAY_FIELDS}
        return TickSeries(
            instrument=self.instrument,
            session_open=bounds.get("session_open", self.session_open),
            session_close=bounds.get("session_close", self.session_close),
            trim_ms=bounds.get("trim_ms", self.trim_ms),
            **cols,
        )

    def equals(self, other: TickSeries) -> bool:
        return (
            self.instrument == other.instrument
            and self.session_open == other.session_open
            and self.session_close == other.session_close
            and self.trim_ms == other.trim_ms
            and all(np.array_equal(getattr(self, f), getattr(other, f))
                    for f in _ARRAY_FIELDS)
        )

    # Decimal views used by the factor and label code.

    def _derived(self, key, fn):
        if key not in self._cache:
            a = fn()
            a.setflags(write=False)
            self._cache[key] = a
        return self._cache[key]

    @property
    def mid(self) -> np.ndarray:
        return self._derived(
            "mid", lambda: (self.bid_px + self.ask_px) / (2.0 * PRICE_SCALE))

    @property
    def trade_px(self) -> np.ndarray:
        return self._derived("trade_px", lambda: self.last_px / PRICE_SCALE)

    @property
    def is_trade(self) -> np.ndarray:
        return self._derived("is_trade", lambda: self.interval_volume > 0)


def make_series(instrument, records, session_open=0, session_close=None):
    """Build a TickSeries from MarketSnapshot objects (decimal prices)."""
    records = list(records)
    if session_close is None:
        session_close = records[-1].t if records else session_open
    cols = {name: [] for name in _ARRAY_FIELDS}
    for r in records:
        cols["t_ms"].append(r.t)
        cols["interval_volume"].append(r.interval_volume)
        cols["bid_sz"].append(r.bid_sz)
        cols["ask_sz"].append(r.ask_sz)
        cols["open_interest"].append(r.open_interest)
        for name in ("last_px", "bid_px", "ask_px"):
            cols[name].append(_to_ticks(Decimal(repr(float(getattr(r, name))))))
    return TickSeries(instrument, int(session_open), int(session_close), **cols)


def _to_ticks(value: Decimal) -> int:
    scaled = value * PRICE_SCALE
    if scaled != scaled.to_integral_value():
        raise ValueError(f"price {value} has more than {PRICE_DECIMALS} decimals")
    return int(scaled)


def _format_px(ticks: int) -> str:
    q, r = divmod(int(ticks), PRICE_SCALE)
    frac = f"{r:0{PRICE_DECIMALS}d}".rstrip("0")
    return f"{q}.{frac}" if frac else str(q)


def instrument_from_path(path) -> str:
    return Path(path).stem.rsplit("_", 1)[0]


def load_ticks(path, instrument=None, session_open=0, session_close=None):
    """Read a tick CSV into a validated TickSeries.

    ``session_close`` defaults to the last record's timestamp. Malformed rows
    raise :class:`LoadError` and out-of-order timestamps raise
    :class:`ValidationError`; both name the 1-based file line.
    """
    path = Path(path)
    if instrument is None:
        instrument = instrument_from_path(path)
    cols = {name: [] for name in _ARRAY_FIELDS}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise LoadError(f"{path}:1: expected header {','.join(CSV_COLUMNS)}")
        prev_t = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise LoadError(
                    f"{path}:{lineno}: expected {len(CSV_COLUMNS)} columns, "
                    f"got {len(row)}")
            try:
                t = int(row[0])
                last, bid, ask = (_to_ticks(Decimal(row[i].strip()))
                                  for i in (1, 3, 4))
                vol, bsz, asz, oi = (int(row[i]) for i in (2, 5, 6, 7))
            except (ValueError, InvalidOperation) as exc:
                raise LoadError(f"{path}:{lineno}: {exc}") from None
            if prev_t is not None and t <= prev_t:
                raise ValidationError(
                    f"{path}:{lineno}: timestamp {t} does not strictly "
                    f"increase (previous {prev_t})")
            prev_t = t
            for name, val in zip(_ARRAY_FIELDS,
                                 (t, last, vol, bid, ask, bsz, asz, oi)):
                cols[name].append(val)
    if session_close is None:
        session_close = cols["t_ms"][-1] if cols["t_ms"] else session_open
    try:
        return TickSeries(instrument, int(session_open), int(session_close), **cols)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_ticks(series: TickSeries, path) -> None:
    """Write the canonical CSV form (minimal decimals, ``\\n`` line ends)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(len(series)):
            fh.write(",".join((
                str(int(series.t_ms[i])),
                _format_px(series.last_px[i]),
                str(int(series.interval_volume[i])),
                _format_px(series.bid_px[i]),
                _format_px(series.ask_px[i]),
                str(int(series.bid_sz[i])),
                str(int(series.ask_sz[i])),
                str(int(series.open_interest[i])),
            )) + "\n")


def cumulative_to_interval(cum_volume) -> np.ndarray:
    """Convert a cumulative-volume column to per-interval volume."""
    cum = np.asarray(cum_volume, dtype=np.int64)
    if cum.size == 0:
        return cum
    out = np.diff(cum, prepend=cum[0])
    if (out < 0).any():
        raise ValidationError("cumulative volume decreases")
    return out


def trim_session_edges(series: TickSeries, trim_s: float = 300) -> TickSeries:
    """Drop the opening and closing ``trim_s`` seconds of the session.

    The trim is measured from the original session bounds, so repeating it
    is a no-op; a smaller trim than one already applied changes nothing.
    """
    if trim_s < 0:
        raise ValueError("trim_s must be non-negative")
    trim_ms = max(series.trim_ms, int(round(trim_s * 1000)))
    lo = series.session_open + trim_ms
    hi = series.session_close - trim_ms
    if hi < lo:
        raise ValidationError(
            f"session of {(series.session_close - series.session_open) / 1000} s "
            f"is shorter than 2 x {trim_s} s; nothing would remain")
    mask = (series.t_ms >= lo) & (series.t_ms <= hi)
    return series.replace_records(mask=mask, trim_ms=trim_ms)


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic snapshot generator.

    Price dynamics are in ticks. ``flow_strength`` couples a persistent
    order-flow state to the next-step drift, which plants predictable
    structure in the factors; 0 gives a driftless walk.
    """

    seed: int = 0
    duration_s: float = 3600.0
    snap_interval_ms: int = 500
    base_px: float = 3000.0
    tick_size: float = 1.0
    vol_per_step: float = 0.3
    jump_prob: float = 0.0
    jump_scale: float = 8.0
    trade_prob: float = 0.6
    max_trade_size: int = 20
    flow_persistence: float = 0.97
    flow_strength: float = 0.0
    depth: float = 40.0
    open_interest: int = 200_000
    instrument: str = "SYN"

    def __post_init__(self):
        for name in ("jump_prob", "trade_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0.0 <= self.flow_persistence < 1.0:
            raise ValueError("flow_persistence must be in [0, 1)")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.snap_interval_ms <= 0 or 1000 % self.snap_interval_ms:
            raise ValueError("snap_interval_ms must be a positive divisor of 1000")
        if self.base_px <= 0 or self.tick_size <= 0:
            raise ValueError("base_px and tick_size must be positive")
        if self.vol_per_step < 0 or self.jump_scale < 0 or self.flow_strength < 0:
            raise ValueError("volatility parameters must be non-negative")
        if self.max_trade_size < 1 or self.open_interest < 1 or self.depth <= 0:
            raise ValueError("sizes must be positive")
        _to_ticks(Decimal(repr(self.tick_size)))


def synthesize_ticks(config: SynthConfig) -> TickSeries:
    """Generate a reproducible snapshot series.

    The mid price is a random walk reflected into ``[base/2, 3*base/2]``
    with Gaussian jumps at rate ``jump_prob``; the spread is one tick.
    Trades occur with probability ``trade_prob`` per snapshot, at the ask
    for buyer-initiated and at the bid for seller-initiated trades.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    n = int(math.floor(cfg.duration_s * 1000 / cfg.snap_interval_ms))
    tick = _to_ticks(Decimal(repr(cfg.tick_size)))
    base = cfg.base_px / cfg.tick_size
    lo, hi = 0.5 * base, 1.5 * base

    noise = rng.standard_normal(n)
    flow_noise = rng.standard_normal(n)
    jump_hit = rng.random(n) < cfg.jump_prob
    jump_size = rng.standard_normal(n) * cfg.jump_scale
    trade_hit = rng.random(n) < cfg.trade_prob
    trade_size = rng.integers(1, cfg.max_trade_size + 1, size=n)
    buy_u = rng.random(n)
    depth_u = rng.standard_normal((n, 2))
    oi_step = rng.integers(-1, 2, size=n)

    phi = cfg.flow_persistence
    flow_scale = math.sqrt(1.0 - phi * phi)
    fair = base
    flow = 0.0
    bid = np.empty(n, dtype=np.int64)
    flows = np.empty(n)
    for k in range(n):
        flow = phi * flow + flow_scale * flow_noise[k]
        step = cfg.vol_per_step * (noise[k] + cfg.flow_strength * flow)
        if jump_hit[k]:
            step += jump_size[k]
        fair += step
        # reflect into [lo, hi]
        while fair < lo or fair > hi:
            fair = 2 * lo - fair if fair < lo else 2 * hi - fair
        bid[k] = int(math.floor(fair))
        flows[k] = flow

    bid_px = bid * tick
    ask_px = bid_px + tick
    buy = buy_u < 1.0 / (1.0 + np.exp(-2.0 * flows))
    volume = np.where(trade_hit, trade_size, 0).astype(np.int64)
    trade_at = np.where(buy, ask_px, bid_px)
    last_px = np.empty(n, dtype=np.int64)
    prev = bid_px[0] if n else 0
    for k in range(n):
        if volume[k] > 0:
            prev = trade_at[k]
        last_px[k] = prev
    # buy pressure thins the ask side
    tilt = 0.5 * flows
    ask_sz = np.maximum(1, np.rint(cfg.depth * np.exp(-tilt + 0.3 * depth_u[:, 0])))
    bid_sz = np.maximum(1, np.rint(cfg.depth * np.exp(tilt + 0.3 * depth_u[:, 1])))
    oi = cfg.open_interest + np.cumsum(oi_step * volume)
    oi = np.maximum(oi, 1)

    t = np.arange(n, dtype=np.int64) * cfg.snap_interval_ms
    close = int(round(cfg.duration_s * 1000))
    return TickSeries(
        instrument=cfg.instrument, session_open=0, session_close=close,
        t_ms=t, last_px=last_px, interval_volume=volume, bid_px=bid_px,
        ask_px=ask_px, bid_sz=bid_sz.astype(np.int64),
        ask_sz=ask_sz.astype(np.int64), open_interest=oi,
    )
