import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from muhf.labeling import forward_returns
from muhf.market_data import (CSV_COLUMNS, LoadError, SynthConfig, ValidationError,
                              cumulative_to_interval, load_ticks, synthesize_ticks,
                              trim_session_edges, write_ticks)

HEADER = ",".join(CSV_COLUMNS) + "\n"


def _write(path, rows):
    path.write_text(HEADER + "".join(r + "\n" for r in rows))
    return path


def _assert_invariants(s):
    assert (np.diff(s.t_ms) > 0).all()
    assert ((s.t_ms >= s.session_open) & (s.t_ms <= s.session_close)).all()
    assert (s.bid_px > 0).all() and (s.ask_px >= s.bid_px).all()
    assert (s.interval_volume >= 0).all() and (s.open_interest > 0).all()
    assert (s.bid_sz >= 0).all() and (s.ask_sz >= 0).all()
    assert np.isfinite(s.mid).all() and (s.mid > 0).all()


def test_load_three_rows(tmp_path):
    p = _write(tmp_path / "IF_20240102.csv", [
        "0,100.5,0,100,101,3,4,500",
        "500,101,2,100.5,101,1,2,500",
        "1000,100.5,1,100,100.5,5,5,501",
    ])
    s = load_ticks(p)
    assert len(s) == 3 and s.instrument == "IF"
    assert s.t_ms.tolist() == [0, 500, 1000]
    assert s[1].last_px == 101.0 and s[2].ask_px == 100.5
    assert s.mid.tolist() == [100.5, 100.75, 100.25]
    _assert_invariants(s)


def test_duplicate_timestamp_names_row(tmp_path):
    p = _write(tmp_path / "X_20240102.csv", [
        "0,100,0,99,101,1,1,10", "500,100,0,99,101,1,1,10", "500,100,0,99,101,1,1,10",
    ])
    with pytest.raises(ValidationError, match=":4:"):
        load_ticks(p)


@pytest.mark.parametrize("row, msg", [
    ("0,100,0,99,101,1,1", "expected 8 columns"),
    ("0,abc,0,99,101,1,1,10", ":2:"),
    ("0,100.00001,0,99,101,1,1,10", "decimals"),
])
def test_malformed_rows_name_line(tmp_path, row, msg):
    p = _write(tmp_path / "X_20240102.csv", [row])
    with pytest.raises(LoadError, match=msg):
        load_ticks(p)


def test_bad_header(tmp_path):
    p = tmp_path / "X_20240102.csv"
    p.write_text("t,px\n0,1\n")
    with pytest.raises(LoadError, match="header"):
        load_ticks(p)


@pytest.mark.parametrize("row", [
    "0,100,0,101,99,1,1,10",   # crossed quotes
    "0,100,-1,99,101,1,1,10",  # negative volume
    "0,100,0,99,101,1,1,0",    # open interest must be positive
    "0,100,0,0,101,1,1,10",    # missing bid side
])
def test_invariant_violations_rejected(tmp_path, row):
    with pytest.raises(ValidationError):
        load_ticks(_write(tmp_path / "X_20240102.csv", [row]))


def test_round_trip_is_byte_identical(tmp_path):
    canonical = _write(tmp_path / "A_20240102.csv", [
        "0,3000.5,0,3000,3001,3,4,500", "500,3001,12,3000.25,3001,1,2,500",
    ])
    s = load_ticks(canonical)
    out = tmp_path / "B_20240102.csv"
    write_ticks(s, out)
    assert out.read_bytes() == canonical.read_bytes()
    # non-canonical decimals are normalised, then stable
    loose = _write(tmp_path / "C_20240102.csv", ["0,3000.50,0,3000.0,3001.000,3,4,500"])
    write_ticks(load_ticks(loose), out)
    assert out.read_text().splitlines()[1] == "0,3000.5,0,3000,3001,3,4,500"


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), tick=st.sampled_from([0.2, 0.5, 1.0, 0.05]))
def test_round_trip_on_generated_files(tmp_path_factory, seed, tick):
    d = tmp_path_factory.mktemp("rt")
    s = synthesize_ticks(SynthConfig(seed=seed, duration_s=30, tick_size=tick,
                                     base_px=1000.0, jump_prob=0.05))
    write_ticks(s, d / "S_20240102.csv")
    back = load_ticks(d / "S_20240102.csv", "SYN", session_close=s.session_close)
    assert back.equals(s)
    write_ticks(back, d / "T_20240102.csv")
    assert (d / "T_20240102.csv").read_bytes() == (d / "S_20240102.csv").read_bytes()


def test_trim_zero_is_identity():
    s = synthesize_ticks(SynthConfig(seed=1, duration_s=60))
    assert trim_session_edges(s, 0).equals(s)


def test_trim_600s_session_leaves_midpoint():
    s = synthesize_ticks(SynthConfig(seed=1, duration_s=600))
    assert len(s) == 1200
    out = trim_session_edges(s, 300)
    assert out.t_ms.tolist() == [300_000]


def test_trim_3600s_session_matches_filter():
    s = synthesize_ticks(SynthConfig(seed=2, duration_s=3600))
    out = trim_session_edges(s, 300)
    expected = ((s.t_ms >= 300_000) & (s.t_ms <= 3_300_000)).sum()
    assert len(out) == expected == 6001
    assert (out.t_ms >= 300_000).all() and (out.t_ms <= 3_300_000).all()
    np.testing.assert_array_equal(out.t_ms, s.t_ms[(s.t_ms >= 300_000)
                                                  & (s.t_ms <= 3_300_000)])


@settings(max_examples=30, deadline=None)
@given(trim=st.integers(0, 2000), seed=st.integers(0, 1000))
def test_trim_is_idempotent(trim, seed):
    s = synthesize_ticks(SynthConfig(seed=seed, duration_s=5))
    once = trim_session_edges(s, trim / 1000)
    assert trim_session_edges(once, trim / 1000).equals(once)


def test_trim_longer_than_session_fails():
    s = synthesize_ticks(SynthConfig(seed=1, duration_s=500))
    with pytest.raises(ValidationError, match="nothing would remain"):
        trim_session_edges(s, 300)
    with pytest.raises(ValueError):
        trim_session_edges(s, -1)


def test_synth_is_deterministic():
    cfg = SynthConfig(seed=7, duration_s=120, jump_prob=0.01, flow_strength=0.3)
    assert synthesize_ticks(cfg).equals(synthesize_ticks(cfg))
    other = synthesize_ticks(SynthConfig(seed=8, duration_s=120))
    assert not other.equals(synthesize_ticks(cfg))


def test_synth_degenerate_dynamics_constant_mid():
    s = synthesize_ticks(SynthConfig(seed=3, duration_s=300, vol_per_step=0.0,
                                     jump_prob=0.0))
    assert np.unique(s.mid).size == 1


def test_synth_snapshot_count():
    assert len(synthesize_ticks(SynthConfig(duration_s=600, snap_interval_ms=500))) == 1200
    assert len(synthesize_ticks(SynthConfig(duration_s=10, snap_interval_ms=250))) == 40


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), jump=st.floats(0, 0.2),
       trade=st.floats(0, 1), vol=st.floats(0, 3))
def test_synth_invariants(seed, jump, trade, vol):
    s = synthesize_ticks(SynthConfig(seed=seed, duration_s=60, jump_prob=jump,
                                     trade_prob=trade, vol_per_step=vol))
    _assert_invariants(s)


def test_synth_trade_rate():
    s = synthesize_ticks(SynthConfig(seed=5, duration_s=3600, trade_prob=0.3))
    assert abs(s.is_trade.mean() - 0.3) < 0.02


@pytest.mark.parametrize("kw", [
    {"jump_prob": 1.5}, {"trade_prob": -0.1}, {"duration_s": 0},
    {"snap_interval_ms": 300}, {"vol_per_step": -1}, {"max_trade_size": 0},
])
def test_synth_config_validation(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)


def test_jumps_fatten_forward_return_tails():
    def tail(jump_prob):
        s = synthesize_ticks(SynthConfig(seed=11, duration_s=7200, jump_prob=jump_prob,
                                         jump_scale=8.0, trade_prob=0.9))
        anchors = s.t_ms[:-20]
        r = np.array([x.fwd_avg_return for x in forward_returns(s, anchors, 5.0)])
        r = r[np.isfinite(r)]
        assert r.size >= 10_000
        return np.percentile(np.abs(r), 99)

    assert tail(0.02) > tail(0.0)


def test_cumulative_to_interval():
    assert cumulative_to_interval([10, 12, 12, 20]).tolist() == [0, 2, 0, 8]
    assert cumulative_to_interval([]).tolist() == []
    with pytest.raises(ValidationError):
        cumulative_to_interval([5, 4])
