import sys

import numpy as np
import pytest

from muhf.market_data import MarketSnapshot, make_series

# (t_s, last, vol, bid, ask, bid_sz, ask_sz, open_interest)
SCRIPTED = [
    (1, 100, 0, 99, 101, 5, 5, 1000),
    (3, 101, 2, 100, 101, 4, 6, 1000),
    (6, 100, 3, 99, 101, 6, 4, 1000),
    (9, 100, 0, 100, 102, 3, 7, 1000),
    (12, 102, 5, 101, 103, 8, 2, 1000),
    (14, 102, 0, 101, 102, 5, 5, 1000),
    (17, 101, 4, 101, 102, 2, 6, 1000),
    (19, 101, 0, 100, 102, 10, 0, 1000),
    (21, 101, 0, 100, 101, 0, 0, 1000),
    (23, 103, 1, 102, 103, 3, 1, 1000),
    (24, 102.5, 6, 102, 103, 2, 2, 1000),
    (25, 102.5, 2, 102.5, 103.5, 1, 3, 2000),
]


def snapshots(rows):
    return [MarketSnapshot(int(round(t * 1000)), float(last), vol, float(b), float(a),
                           bs, as_, oi)
            for t, last, vol, b, a, bs, as_, oi in rows]


@pytest.fixture
def scripted_series():
    return make_series("TST", snapshots(SCRIPTED), session_open=0, session_close=30_000)


def random_series(rng, n=200, step_ms=500, start_ms=0, base=3000.0, instrument="RND"):
    """Random valid series with prices on a 0.5 grid."""
    t = start_ms + step_ms * np.arange(1, n + 1)
    mid2 = np.round(2 * base + np.cumsum(rng.integers(-2, 3, n)))
    spread = rng.integers(1, 4, n)
    bid = (mid2 - spread) / 2.0
    ask = (mid2 + spread) / 2.0
    vol = np.where(rng.random(n) < 0.6, rng.integers(1, 20, n), 0)
    last = np.where(rng.random(n) < 0.5, bid, ask)
    rows = [(int(t[i]), float(last[i]), int(vol[i]), float(bid[i]), float(ask[i]),
             int(rng.integers(0, 50)), int(rng.integers(0, 50)), int(rng.integers(1000, 5000)))
            for i in range(n)]
    recs = [MarketSnapshot(*r) for r in rows]
    return make_series(instrument, recs, session_open=start_ms,
                       session_close=int(t[-1]) + step_ms)


def _row_series(rows, session_close=None):
    """Series from ``(t_s, last, vol, bid, ask)`` rows with fixed sizes."""
    full = [(t, last, vol, b, a, 5, 5, 1000) for t, last, vol, b, a in rows]
    return make_series("T", snapshots(full), 0, session_close)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
