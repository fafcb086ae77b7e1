"""Command-line entry point: ``muhf synth | featurize | backtest | report``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import backtest as bt
from .features import build_feature_matrix, write_features
from .labeling import Direction, forward_returns, label_returns, percentile_threshold
from .market_data import SynthConfig, load_ticks, trim_session_edges

log = logging.getLogger("muhf")


def _add_synth(sub):
    p = sub.add_parser("synth", help="write synthetic tick days")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--instruments", required=True, help="comma-separated identifiers")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--start", default="20240102", help="first day, YYYYMMDD")
    for f in dataclasses.fields(SynthConfig):
        if f.name in ("seed", "instrument"):
            continue
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=type(f.default),
                       default=None)


def _add_featurize(sub):
    p = sub.add_parser("featurize", help="tick CSV to labelled feature CSV")
    p.add_argument("ticks")
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=("up", "down"), default="up")
    p.add_argument("--percentile", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None,
                   help="fixed return threshold instead of the file's own percentile")
    for name in ("lookback_s", "horizon_s", "grid_stride_s", "trim_s"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float,
                       default=bt.BacktestConfig.__dataclass_fields__[name].default)


def _add_backtest(sub):
    p = sub.add_parser("backtest", help="run the rolling-fold backtest")
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--out", required=True, help="output prefix for report files")
    p.add_argument("--format", default="csv,jsonl")
    p.add_argument("--audit", action="store_true",
                   help="also run the no-lookahead audit; nonzero exit on violation")
    for f in dataclasses.fields(bt.BacktestConfig):
        required = f.name in ("seed", "task", "models")
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None,
                       required=required)


def _add_report(sub):
    p = sub.add_parser("report", help="re-aggregate and render report files")
    p.add_argument("reports", nargs="+", help="CSV or JSONL report files")
    p.add_argument("--out", help="write merged report files with this prefix")
    p.add_argument("--format", default="csv,jsonl")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="muhf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_synth(sub)
    _add_featurize(sub)
    _add_backtest(sub)
    _add_report(sub)
    return parser


def cmd_synth(args) -> int:
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(SynthConfig)
                 if f.name not in ("seed", "instrument")
                 and getattr(args, f.name) is not None}
    insts = [s.strip() for s in args.instruments.split(",") if s.strip()]
    paths = bt.write_synthetic_days(args.out_dir, insts, args.days, args.seed,
                                    args.start, **overrides)
    print(f"wrote {len(paths)} files to {args.out_dir}")
    return 0


def cmd_featurize(args) -> int:
    direction = Direction(args.task.upper())
    pct = args.percentile if args.percentile is not None else (
        95.0 if direction is Direction.UP else 5.0)
    cfg = bt.BacktestConfig(lookback_s=args.lookback_s, horizon_s=args.horizon_s,
                            grid_stride_s=args.grid_stride_s, trim_s=args.trim_s)
    series = trim_session_edges(load_ticks(args.ticks), args.trim_s)
    anchors = bt.sample_grid(series, args.lookback_s, args.horizon_s, args.grid_stride_s)
    anchors = anchors[anchors >= series.t_ms[0]]
    fm = build_feature_matrix(series, anchors, cfg.lookback)
    samples = forward_returns(series, anchors, args.horizon_s)
    r = np.array([s.fwd_avg_return for s in samples])
    usable = fm.valid & np.array([s.usable for s in samples], dtype=bool)
    threshold = args.threshold
    if threshold is None:
        threshold = percentile_threshold(r[usable], pct) if usable.any() else float("nan")
    labels = np.full(r.shape, -1, dtype=np.int64)
    if usable.any():
        labels[usable] = label_returns(r[usable], direction, threshold)
    write_features(fm, args.out, {
        "n_fwd_trades": [s.n_fwd_trades for s in samples],
        "fwd_avg_return": r, "label": labels})
    print(f"{len(anchors)} anchors, {int(usable.sum())} labelled "
          f"(threshold {threshold!r}) -> {args.out}")
    return 0


def _config_from_args(args) -> bt.BacktestConfig:
    values = bt.read_config_file(args.config) if args.config else {}
    for f in dataclasses.fields(bt.BacktestConfig):
        raw = getattr(args, f.name)
        if raw is not None:
            values[f.name] = bt.parse_config_value(f.name, raw)
    if "task" in values:
        values["task"] = str(values["task"]).upper()
    for key in ("selection_metric", "short_rule", "threshold_scope", "residual_source"):
        if key in values:
            values[key] = str(values[key]).upper()
    return bt.BacktestConfig(**values)


def cmd_backtest(args) -> int:
    cfg = _config_from_args(args)
    report = bt.run_backtest(cfg)
    for path in bt.emit_report(report, args.out, _formats(args.format)):
        print(f"wrote {path}")
    print(bt.format_table(report))
    if args.audit:
        problems = []
        for inst in cfg.instruments:
            problems.extend(bt.audit_no_lookahead(cfg, inst))
        if problems:
            for p in problems:
                print(f"audit: {p}", file=sys.stderr)
            return 3
        print("audit: no lookahead detected")
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in args.reports:
        rows.extend(bt.load_report(path).rows)
    rows.sort(key=bt._sort_key)
    report = bt.BacktestReport(rows, bt.aggregate(rows))
    if args.out:
        for path in bt.emit_report(report, args.out, _formats(args.format)):
            print(f"wrote {path}")
    print(bt.format_table(report))
    return 0


def _formats(text):
    fmts = tuple(f.strip().lower() for f in text.split(",") if f.strip())
    bad = [f for f in fmts if f not in ("csv", "jsonl")]
    if bad:
        raise bt.BacktestError(f"unknown report format(s): {', '.join(bad)}")
    return fmts


COMMANDS = {"synth": cmd_synth, "featurize": cmd_featurize,
            "backtest": cmd_backtest, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"muhf {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
