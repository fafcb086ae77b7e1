"""Rolling-fold backtest of the eight model families.

Per fold: features and forward returns are built for every day, the
percentile threshold is fitted on the training days, each model family is
trained on the training days only and scored on the test day. Rows are
emitted per (instrument, model, fold); aggregates pool confusion counts and
strategy returns across folds.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .calibration import (NULL_CALIBRATION, ResidualSource, SelectionMetric, WindowGrid,
                          classify_with_uncertainty, fit_calibrated)
from .classifiers import (ConvergenceError, DegenerateFitError, TrainConfig,
                          decision_function, fit_logistic, fit_svm, predict_base)
from .evaluation import (ConfusionMatrix, ShortRule, Side, _report, beta_from_counts,
                         compounded, confusion, long_strategy_returns, metric_report,
                         short_strategy_returns)
from .features import LookbackSpec, build_feature_matrix
from .labeling import Direction, forward_returns, label_returns, percentile_threshold
from .market_data import load_ticks, trim_session_edges
from .resampling import Method, ResampleConfig, ResampleError, rebalance

log = logging.getLogger(__name__)


class BacktestError(ValueError):
    pass


class ModelFamily(str, Enum):
    LR = "LR"
    SMOTE_LR = "SMOTE_LR"
    RUS_LR = "RUS_LR"
    MU_LR = "MU_LR"
    SVM = "SVM"
    SMOTE_SVM = "SMOTE_SVM"
    RUS_SVM = "RUS_SVM"
    MU_SVM = "MU_SVM"

    @classmethod
    def parse(cls, text: str) -> ModelFamily:
        return cls(text.strip().upper().replace("-", "_"))

    @property
    def base(self) -> str:
        return "LR" if self.value.endswith("LR") else "SVM"

    @property
    def resampling(self) -> Method | None:
        if self.value.startswith("SMOTE"):
            return Method.SMOTE
        if self.value.startswith("RUS"):
            return Method.RUS
        return None

    @property
    def uncertain(self) -> bool:
        return self.value.startswith("MU_")


MODEL_ORDER = list(ModelFamily)


class ThresholdScope(str, Enum):
    TRAIN = "TRAIN"    # fitted on the training days of each fold
    DAY = "DAY"        # every day labelled by its own percentile
    GLOBAL = "GLOBAL"  # one threshold over every day of the instrument (looks ahead)


@dataclass(frozen=True)
class BacktestConfig:
    instruments: tuple = ()
    data_dir: str = "data"
    task: Direction = Direction.UP
    models: tuple = tuple(MODEL_ORDER)
    train_days: int = 2
    test_days: int = 1
    fold_stride_days: int = 1
    lookback_s: float = 25.0
    horizon_s: float = 5.0
    grid_stride_s: float = 5.0
    trim_s: float = 300.0
    percentile: float | None = None
    window_candidates: tuple = (50, 100, 200, 400)
    selection_metric: SelectionMetric = SelectionMetric.BACC
    validation_fraction: float = 0.25
    residual_source: ResidualSource = ResidualSource.IN_SAMPLE
    holdout_fraction: float = 0.3
    seed: int = 0
    short_rule: ShortRule = ShortRule.LITERAL
    threshold_scope: ThresholdScope = ThresholdScope.TRAIN
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    lr_l2: float = 1e-6
    k_neighbors: int = 5
    target_ratio: float = 1.0

    def __post_init__(self):
        conv = {
            "task": Direction, "selection_metric": SelectionMetric,
            "short_rule": ShortRule, "threshold_scope": ThresholdScope,
            "residual_source": ResidualSource,
        }
        for name, typ in conv.items():
            object.__setattr__(self, name, typ(getattr(self, name)))
        object.__setattr__(self, "instruments", tuple(self.instruments))
        object.__setattr__(self, "models", tuple(
            m if isinstance(m, ModelFamily) else ModelFamily.parse(m)
            for m in self.models))
        object.__setattr__(self, "window_candidates",
                           tuple(int(c) for c in self.window_candidates))
        if self.percentile is None:
            object.__setattr__(self, "percentile",
                               95.0 if self.task is Direction.UP else 5.0)
        if min(self.train_days, self.test_days, self.fold_stride_days) < 1:
            raise BacktestError("day counts must be positive")
        if not self.models:
            raise BacktestError("at least one model family is required")

    @property
    def lookback(self) -> LookbackSpec:
        windows = [w for w in LookbackSpec().windows if w[1] <= self.lookback_s]
        if not windows or windows[-1][1] != self.lookback_s:
            raise BacktestError("lookback_s must end one of the default windows")
        return LookbackSpec(tuple(windows))

    @property
    def n_grid(self) -> WindowGrid:
        return WindowGrid(self.window_candidates, self.selection_metric,
                          self.validation_fraction)

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(lr_l2=self.lr_l2, svm_C=self.svm_C, svm_tol=self.svm_tol)


def _field_types():
    return {f.name: f for f in dataclasses.fields(BacktestConfig)}


def parse_config_value(name: str, raw: str):
    """Convert a flat-config string to the type of ``BacktestConfig.<name>``."""
    fields = _field_types()
    if name not in fields:
        raise BacktestError(f"unknown config key {name!r}")
    raw = raw.strip()
    default = fields[name].default
    if name in ("instruments", "models"):
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if name == "window_candidates":
        return tuple(int(x) for x in raw.split(",") if x.strip())
    if name == "percentile":
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    if isinstance(default, Enum) or name == "data_dir":
        return raw
    if isinstance(default, int) and not isinstance(default, bool):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines (``#`` comments, blank lines ignored)."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BacktestError(f"{path}:{lineno}: expected key = value")
        key, raw = line.split("=", 1)
        key = key.strip()
        values[key] = parse_config_value(key, raw)
    return values


# -- folds and anchor grid -----------------------------------------------------

@dataclass(frozen=True)
class Fold:
    index: int
    train: tuple
    test: tuple


def rolling_folds(days, train_days=2, test_days=1, stride_days=1) -> list[Fold]:
    """Chronological train/test folds; the window advances ``stride_days`` each time."""
    days = list(days)
    span = train_days + test_days
    if len(days) < span:
        raise BacktestError(
            f"{len(days)} days cannot fill one fold of {train_days}+{test_days}")
    folds = []
    for k, start in enumerate(range(0, len(days) - span + 1, stride_days)):
        folds.append(Fold(k, tuple(days[start:start + train_days]),
                          tuple(days[start + train_days:start + span])))
    return folds


def sample_grid(series, lookback_s=25.0, horizon_s=5.0, grid_stride_s=5.0) -> np.ndarray:
    """Anchors (ms) spaced ``grid_stride_s`` apart with full history and horizon."""
    first = series.active_open + int(round(lookback_s * 1000))
    last = series.active_close - int(round(horizon_s * 1000))
    step = int(round(grid_stride_s * 1000))
    if last < first:
        log.warning("session of %s s too short for a %s s window",
                    (series.active_close - series.active_open) / 1000,
                    lookback_s + horizon_s)
        return np.zeros(0, dtype=np.int64)
    return np.arange(first, last + 1, step, dtype=np.int64)


# -- per-day datasets ------------------------------------------------------------

@dataclass(frozen=True)
class DayData:
    day: str
    anchors: np.ndarray
    X: np.ndarray
    returns: np.ndarray

    def __len__(self):
        return len(self.anchors)


def prepare_series(series, cfg: BacktestConfig, day: str = "") -> DayData:
    """Trim, grid, featurize and attach forward returns; drops unusable anchors."""
    trimmed = trim_session_edges(series, cfg.trim_s)
    anchors = sample_grid(trimmed, cfg.lookback_s, cfg.horizon_s, cfg.grid_stride_s)
    anchors = anchors[anchors >= trimmed.t_ms[0]] if len(trimmed) else anchors[:0]
    fm = build_feature_matrix(trimmed, anchors, cfg.lookback)
    samples = forward_returns(trimmed, anchors, cfg.horizon_s)
    usable = np.array([s.usable for s in samples], dtype=bool)
    keep = fm.valid & usable if len(anchors) else np.zeros(0, dtype=bool)
    returns = np.array([s.fwd_avg_return for s in samples], dtype=np.float64)
    return DayData(day, anchors[keep], fm.values[keep], returns[keep] if len(anchors)
                   else np.zeros(0))


def discover_days(data_dir, instrument) -> dict:
    """Map ``YYYYMMDD`` to file path for ``<instrument>_<YYYYMMDD>.csv``."""
    out = {}
    for p in sorted(Path(data_dir).glob(f"{instrument}_*.csv")):
        stamp = p.stem.rsplit("_", 1)[1]
        if len(stamp) == 8 and stamp.isdigit():
            out[stamp] = p
    return out


def derive_seed(*parts) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# -- fitting and scoring -------------------------------------------------------------

REPORT_COLUMNS = (
    "kind", "instrument", "model", "fold", "task", "status", "reason",
    "train_days", "test_days", "threshold", "n_train", "m_neg_train", "m_pos_train",
    "n_test", "tn", "fp", "fn", "tp", "recall", "precision", "bacc", "f_beta",
    "beta", "side", "short_rule", "n_folds", "n_trades", "gross_return",
    "cumulative_return", "avg_return_per_trade", "alt_gross_return",
    "alt_cumulative_return", "mu_upper", "mu_lower", "window_n", "clamped",
)


@dataclass
class FoldArtifacts:
    """Everything derived from the training days of one fold."""

    threshold: float
    n_train: int
    m_pos: int
    models: dict = field(default_factory=dict)  # family -> (model, calibration)
    failures: dict = field(default_factory=dict)

    def fingerprint(self) -> str:
        from .artifacts import model_to_dict
        payload = {"threshold": self.threshold, "n_train": self.n_train,
                   "m_pos": self.m_pos, "failures": self.failures, "models": {}}
        for fam, (model, cal) in sorted(self.models.items()):
            payload["models"][fam] = model_to_dict(model, cal)
        return json.dumps(payload, sort_keys=True)


def _concat(days):
    X = np.vstack([d.X for d in days]) if days else np.zeros((0, 0))
    r = np.concatenate([d.returns for d in days]) if days else np.zeros(0)
    return X, r


def _labels(days, cfg, threshold):
    if cfg.threshold_scope is ThresholdScope.DAY:
        parts = [label_returns(d.returns, cfg.task,
                               percentile_threshold(d.returns, cfg.percentile))
                 for d in days if len(d)]
    else:
        parts = [label_returns(d.returns, cfg.task, threshold) for d in days if len(d)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def _fit_base(base, X, y, tcfg):
    return fit_logistic(X, y, tcfg) if base == "LR" else fit_svm(X, y, tcfg)


def _plain(cache, base, X, y, tcfg):
    if base not in cache:
        cache[base] = _fit_base(base, X, y, tcfg)
    return cache[base]


def train_fold(train_data, cfg: BacktestConfig, instrument: str, fold_index: int,
               threshold: float | None = None) -> FoldArtifacts:
    """Fit threshold, models and calibrations from training days only.

    ``threshold`` overrides the training-fold percentile (global scope).
    """
    X, r = _concat(train_data)
    if X.shape[0] == 0:
        raise BacktestError("no usable training samples")
    if cfg.threshold_scope is ThresholdScope.DAY:
        threshold = float("nan")
    elif threshold is None:
        threshold = percentile_threshold(r, cfg.percentile)
    y = _labels(train_data, cfg, threshold)
    art = FoldArtifacts(threshold, int(y.size), int(y.sum()))
    tcfg = cfg.train_config
    plain = {}
    for fam in cfg.models:
        try:
            if y.min() == y.max():
                raise DegenerateFitError("training fold holds a single class")
            cal = None
            if fam.uncertain:
                def fit(Xf, yf, base=fam.base):
                    # in-sample MU models reuse the plain fit of the same family
                    if Xf.shape[0] == X.shape[0]:
                        return _plain(plain, base, X, y, tcfg)
                    return _fit_base(base, Xf, yf, tcfg)
                model, cal = fit_calibrated(fit, X, y, cfg.n_grid, cfg.residual_source,
                                            cfg.holdout_fraction)
            elif fam.resampling is None:
                model = _plain(plain, fam.base, X, y, tcfg)
            else:
                rcfg = ResampleConfig(fam.resampling, cfg.k_neighbors, cfg.target_ratio,
                                      derive_seed(cfg.seed, instrument, fold_index, fam.value))
                Xr, yr = rebalance(X, y, rcfg)
                model = _fit_base(fam.base, Xr, yr, tcfg)
            art.models[fam.value] = (model, cal)
        except (DegenerateFitError, ConvergenceError, ResampleError, ValueError) as exc:
            art.failures[fam.value] = f"{type(exc).__name__}: {exc}"
    return art


def score_fold(art: FoldArtifacts, test_data, cfg: BacktestConfig, instrument: str,
               fold: Fold) -> list[dict]:
    X, r = _concat(test_data)
    y = _labels(test_data, cfg, art.threshold)
    m_pos, m_neg = art.m_pos, art.n_train - art.m_pos
    beta = beta_from_counts(m_neg, m_pos) if m_pos and m_neg else float("nan")
    side = Side.LONG if cfg.task is Direction.UP else Side.SHORT
    rows = []
    for fam in cfg.models:
        row = _blank_row(instrument, fam, fold, cfg)
        row.update(threshold=art.threshold, n_train=art.n_train, m_neg_train=m_neg,
                   m_pos_train=m_pos, n_test=int(y.size), side=side.value)
        if fam.value in art.failures or X.shape[0] == 0:
            row.update(status="SKIPPED",
                       reason=art.failures.get(fam.value, "no usable test samples"))
            rows.append(row)
            continue
        model, cal = art.models[fam.value]
        if fam.uncertain:
            pred = classify_with_uncertainty(decision_function(model, X), cal)
        else:
            pred = predict_base(model, X)
        _fill_scores(row, confusion(y, pred), beta, r[pred == 1], side, cfg.short_rule)
        c = cal or NULL_CALIBRATION
        row.update(mu_upper=c.mu_upper, mu_lower=c.mu_lower,
                   window_n=c.window_n if cal else 0, clamped=int(c.clamped))
        rows.append(row)
    return rows


def _blank_row(instrument, fam, fold, cfg):
    row = dict.fromkeys(REPORT_COLUMNS, "")
    row.update(kind="fold", instrument=instrument, model=fam.value, fold=fold.index,
               task=cfg.task.value, status="OK", train_days="+".join(fold.train),
               test_days="+".join(fold.test), short_rule=cfg.short_rule.value,
               n_folds=1)
    return row


def _gross(traded, side, short_rule):
    # growth factor whose pooled product gives the pooled strategy return
    if side is Side.SHORT and short_rule is ShortRule.COMPOUND:
        return compounded(-np.asarray(traded)) + 1.0
    return compounded(traded) + 1.0


def _other(rule):
    return ShortRule.COMPOUND if rule is ShortRule.LITERAL else ShortRule.LITERAL


def _fill_scores(row, cm, beta, traded, side, short_rule):
    mr = metric_report(cm, 0.0 if math.isnan(beta) else beta)
    if side is Side.LONG:
        sr = long_strategy_returns(traded)
    else:
        sr = short_strategy_returns(traded, short_rule)
        # the other short reading, reported side by side
        alt = _other(short_rule)
        row.update(alt_gross_return=_gross(traded, side, alt),
                   alt_cumulative_return=short_strategy_returns(
                       traded, alt).cumulative_return)
    row.update(tn=cm.tn, fp=cm.fp, fn=cm.fn, tp=cm.tp, recall=mr.recall,
               precision=mr.precision, bacc=mr.bacc,
               f_beta=mr.f_beta if not math.isnan(beta) else float("nan"),
               beta=beta, n_trades=sr.n_trades,
               gross_return=_gross(traded, side, short_rule),
               cumulative_return=sr.cumulative_return,
               avg_return_per_trade=sr.avg_return_per_trade)


def fit_and_score(fold: Fold, day_data: dict, cfg: BacktestConfig, instrument: str):
    """Returns ``(artifacts, rows)`` for one fold."""
    train = [day_data[d] for d in fold.train]
    test = [day_data[d] for d in fold.test]
    threshold = None
    if cfg.threshold_scope is ThresholdScope.GLOBAL:
        _, r_all = _concat([day_data[d] for d in sorted(day_data)])
        threshold = percentile_threshold(r_all, cfg.percentile)
    try:
        art = train_fold(train, cfg, instrument, fold.index, threshold)
    except (BacktestError, ValueError) as exc:
        art = FoldArtifacts(float("nan"), 0, 0,
                            failures={f.value: f"{type(exc).__name__}: {exc}"
                                      for f in cfg.models})
    return art, score_fold(art, test, cfg, instrument, fold)


def run_fold(fold: Fold, day_data: dict, cfg: BacktestConfig, instrument: str) -> list[dict]:
    return fit_and_score(fold, day_data, cfg, instrument)[1]


# -- whole runs ------------------------------------------------------------------

@dataclass
class BacktestReport:
    rows: list
    aggregates: list

    def __eq__(self, other):
        return (isinstance(other, BacktestReport)
                and _canon(self.rows) == _canon(other.rows)
                and _canon(self.aggregates) == _canon(other.aggregates))


def _canon(rows):
    return [json.dumps({k: _jsonable(r[k]) for k in REPORT_COLUMNS}, sort_keys=True)
            for r in rows]


def _sort_key(row):
    fold = row["fold"]
    return (row["instrument"], MODEL_ORDER.index(ModelFamily(row["model"])),
            -1 if fold == "ALL" else int(fold))


def load_instrument_days(cfg: BacktestConfig, instrument: str) -> dict:
    files = discover_days(cfg.data_dir, instrument)
    out = {}
    for day, path in sorted(files.items()):
        out[day] = prepare_series(load_ticks(path, instrument), cfg, day)
    return out


def run_backtest(cfg: BacktestConfig) -> BacktestReport:
    if not cfg.instruments:
        raise BacktestError("no instruments configured")
    missing = []
    available = {}
    for inst in cfg.instruments:
        days = discover_days(cfg.data_dir, inst)
        if len(days) < cfg.train_days + cfg.test_days:
            missing.append(f"{inst}: {len(days)} day file(s) in {cfg.data_dir}")
        available[inst] = days
    if missing:
        raise BacktestError("insufficient data files:\n  " + "\n  ".join(missing))
    rows = []
    for inst in cfg.instruments:
        day_data = load_instrument_days(cfg, inst)
        for fold in rolling_folds(sorted(day_data), cfg.train_days, cfg.test_days,
                                  cfg.fold_stride_days):
            log.info("%s fold %d: train %s test %s", inst, fold.index,
                     fold.train, fold.test)
            rows.extend(run_fold(fold, day_data, cfg, inst))
    rows.sort(key=_sort_key)
    return BacktestReport(rows, aggregate(rows))


def _pooled(rows, column, side, rule):
    gross = 1.0
    for r in rows:
        gross *= float(r[column])
    total = gross - 1.0
    if side is Side.SHORT and rule is ShortRule.LITERAL:
        total = -total
    return gross, total


def aggregate(rows) -> list[dict]:
    """Pool fold rows per (instrument, model): counts summed, returns compounded."""
    groups = {}
    for r in rows:
        if r["kind"] == "fold":
            groups.setdefault((r["instrument"], r["model"]), []).append(r)
    out = []
    for (inst, model), grp in groups.items():
        ok = [r for r in grp if r["status"] == "OK"]
        agg = dict.fromkeys(REPORT_COLUMNS, "")
        agg.update(kind="aggregate", instrument=inst, model=model, fold="ALL",
                   task=grp[0]["task"], status="OK" if ok else "SKIPPED",
                   reason="" if ok else "all folds skipped",
                   short_rule=grp[0]["short_rule"], n_folds=len(ok))
        if ok:
            cm = ConfusionMatrix()
            for r in ok:
                cm = cm + ConfusionMatrix(int(r["tn"]), int(r["fp"]),
                                          int(r["fn"]), int(r["tp"]))
            m_neg = sum(int(r["m_neg_train"]) for r in ok)
            m_pos = sum(int(r["m_pos_train"]) for r in ok)
            beta = beta_from_counts(m_neg, m_pos) if m_neg and m_pos else float("nan")
            mr = metric_report(cm, 0.0 if math.isnan(beta) else beta)
            side = Side(ok[0]["side"])
            rule = ShortRule(ok[0]["short_rule"])
            n = sum(int(r["n_trades"]) for r in ok)
            gross, total = _pooled(ok, "gross_return", side, rule)
            sr = _report(side, n, total)
            if side is Side.SHORT:
                alt_gross, alt_total = _pooled(ok, "alt_gross_return", side, _other(rule))
                agg.update(alt_gross_return=alt_gross,
                           alt_cumulative_return=_report(side, n, alt_total).cumulative_return)
            agg.update(n_train=sum(int(r["n_train"]) for r in ok),
                       m_neg_train=m_neg, m_pos_train=m_pos,
                       n_test=sum(int(r["n_test"]) for r in ok),
                       tn=cm.tn, fp=cm.fp, fn=cm.fn, tp=cm.tp, recall=mr.recall,
                       precision=mr.precision, bacc=mr.bacc,
                       f_beta=mr.f_beta if not math.isnan(beta) else float("nan"),
                       beta=beta, side=side.value, n_trades=n, gross_return=gross,
                       cumulative_return=sr.cumulative_return,
                       avg_return_per_trade=sr.avg_return_per_trade)
        out.append(agg)
    out.sort(key=_sort_key)
    return out


# -- report files ------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    return v


def _cell(v):
    v = _jsonable(v)
    if v is None:
        return "nan"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_to_csv(report: BacktestReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for row in [*report.rows, *report.aggregates]:
        w.writerow([_cell(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def report_to_jsonl(report: BacktestReport) -> str:
    return "".join(json.dumps({c: _jsonable(row[c]) for c in REPORT_COLUMNS}) + "\n"
                   for row in [*report.rows, *report.aggregates])


def emit_report(report: BacktestReport, prefix, formats=("csv", "jsonl")) -> list[Path]:
    """Write ``<prefix>.csv`` and/or ``<prefix>.jsonl``; returns the paths."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        path = prefix.with_name(prefix.name + f".{fmt}")
        text = report_to_csv(report) if fmt == "csv" else report_to_jsonl(report)
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


_INT_COLS = {"n_train", "m_neg_train", "m_pos_train", "n_test", "tn", "fp", "fn",
             "tp", "n_folds", "n_trades", "window_n", "clamped"}
_FLOAT_COLS = {"threshold", "recall", "precision", "bacc", "f_beta", "beta",
               "gross_return", "cumulative_return", "avg_return_per_trade",
               "alt_gross_return", "alt_cumulative_return",
               "mu_upper", "mu_lower"}


def _restore(row: dict) -> dict:
    out = {}
    for c in REPORT_COLUMNS:
        v = row.get(c, "")
        if v is None:
            v = float("nan")
        elif v == "":
            pass
        elif c in _INT_COLS:
            v = int(v)
        elif c in _FLOAT_COLS:
            v = float(v)
        elif c == "fold" and str(v) != "ALL":
            v = int(v)
        else:
            v = str(v)
        out[c] = v
    return out


def load_report(path) -> BacktestReport:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        raw = [json.loads(line) for line in text.splitlines() if line.strip()]
    else:
        raw = list(csv.DictReader(io.StringIO(text)))
    rows = [_restore(r) for r in raw]
    return BacktestReport([r for r in rows if r["kind"] == "fold"],
                          [r for r in rows if r["kind"] == "aggregate"])


def format_table(report: BacktestReport) -> str:
    """Aggregates as a plain-text table in the layout of a results table."""
    cols = ("instrument", "model", "bacc", "f_beta", "recall", "n_trades",
            "avg_return_per_trade")
    lines = ["  ".join(f"{c:>20}" for c in cols)]
    for row in report.aggregates:
        cells = []
        for c in cols:
            v = row[c]
            cells.append(f"{v:>20.4g}" if isinstance(v, float) else f"{v!s:>20}")
        lines.append("  ".join(cells))
    return "\n".join(lines)


# -- lookahead audit -------------------------------------------------------------

def _scrambled(day: DayData, rng) -> DayData:
    X = day.X * rng.uniform(0.5, 2.0, day.X.shape) + rng.normal(size=day.X.shape)
    return DayData(day.day, day.anchors, X, -day.returns[::-1].copy())


def audit_no_lookahead(cfg: BacktestConfig, instrument: str, folds=None,
                       n_feature_probes: int = 5) -> list[str]:
    """Check that nothing fitted for a fold depends on its test-day data.

    Each audited fold is run twice through :func:`fit_and_score`, the second
    time with its test days replaced by scrambled features and returns; the
    training-side fingerprint (threshold, standardization, gamma, coefficients,
    calibration) must be bit-identical. Feature rows are also recomputed on
    series truncated at their anchor. Returns the violations found.
    """
    problems = []
    day_data = load_instrument_days(cfg, instrument)
    all_folds = rolling_folds(sorted(day_data), cfg.train_days, cfg.test_days,
                              cfg.fold_stride_days)
    rng = np.random.default_rng(derive_seed(cfg.seed, "audit", instrument))
    for fold in (all_folds if folds is None else [all_folds[i] for i in folds]):
        base, _ = fit_and_score(fold, day_data, cfg, instrument)
        shifted = dict(day_data)
        for d in fold.test:
            shifted[d] = _scrambled(day_data[d], rng)
        again, _ = fit_and_score(fold, shifted, cfg, instrument)
        if base.fingerprint() != again.fingerprint():
            problems.append(f"{instrument} fold {fold.index}: training artifacts "
                            "changed when test-day data changed")
    problems.extend(_audit_features(cfg, instrument, n_feature_probes, rng))
    return problems


def _audit_features(cfg, instrument, n_probes, rng):
    problems = []
    files = discover_days(cfg.data_dir, instrument)
    if not files:
        return problems
    day, path = sorted(files.items())[0]
    series = trim_session_edges(load_ticks(path, instrument), cfg.trim_s)
    anchors = sample_grid(series, cfg.lookback_s, cfg.horizon_s, cfg.grid_stride_s)
    if anchors.size == 0:
        return problems
    picks = np.sort(rng.choice(anchors, size=min(n_probes, anchors.size), replace=False))
    full = build_feature_matrix(series, picks, cfg.lookback)
    for i, T in enumerate(picks):
        cut = series.replace_records(mask=series.t_ms <= T)
        part = build_feature_matrix(cut, [T], cfg.lookback)
        if not np.array_equal(full.values[i], part.values[0]):
            problems.append(f"{day} anchor {T}: features use data after the anchor")
    return problems


# -- synthetic day files -----------------------------------------------------------

def trading_days(start: str, n_days: int) -> list[str]:
    """``n_days`` weekdays from ``start`` (``YYYYMMDD``) onward."""
    first = np.datetime64(f"{start[:4]}-{start[4:6]}-{start[6:]}")
    days = np.busday_offset(first, np.arange(n_days), roll="forward")
    return [str(d).replace("-", "") for d in days]


def write_synthetic_days(out_dir, instruments, n_days: int, seed: int,
                         start: str = "20240102", **synth) -> list[Path]:
    """Write ``<instrument>_<YYYYMMDD>.csv`` files from the synthetic generator.

    Each (instrument, day) draws its own seed from ``seed``; the base price
    of an instrument is fixed across its days. ``synth`` overrides
    :class:`SynthConfig` fields.
    """
    from .market_data import SynthConfig, synthesize_ticks, write_ticks
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for inst in instruments:
        base_px = synth.get("base_px", 1000.0 + derive_seed(seed, inst) % 4000)
        for day in trading_days(start, n_days):
            cfg = SynthConfig(**{**synth, "seed": derive_seed(seed, inst, day),
                                 "instrument": inst, "base_px": float(base_px)})
            path = out_dir / f"{inst}_{day}.csv"
            write_ticks(synthesize_ticks(cfg), path)
            paths.append(path)
    return paths
