"""Mean-uncertainty calibration of a fitted classifier.

Given chronologically ordered training decision values ``z_i`` and labels
``y_i``, the upper shift solves

    h(mu) = max_k mean_{j<N} [y_{k+j} - sigmoid(z_{k+j} + mu)] = 0

and the lower shift solves the same equation with ``min_k``. Predictions use
the upper probability ``sigmoid(z + mu_upper)`` against 0.5. With
``mu_upper == 0`` this reproduces the base classifier exactly.

All ``n - N + 1`` full windows are used (``k = 0 .. n - N``).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from ._backend import kernels
from .classifiers import decision_function
from .evaluation import bacc, beta_from_counts, confusion, f_beta

DEFAULT_CLAMP = 20.0
DEFAULT_TOL = 1e-10
INITIAL_BRACKET = 8.0
DEFAULT_WINDOW_CANDIDATES = (50, 100, 200, 400)


class CalibrationError(ValueError):
    pass


def _checked(values, n_window):
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if not 1 <= n_window <= v.shape[0]:
        raise CalibrationError(
            f"window size {n_window} must lie in [1, {v.shape[0]}]")
    return v


def window_means(values, n_window: int) -> np.ndarray:
    """Means of every full window of length ``n_window``, in order."""
    return kernels.window_means(_checked(values, n_window), int(n_window))


def max_mean(values, n_window: int) -> float:
    return float(window_means(values, n_window).max())


def min_mean(values, n_window: int) -> float:
    return float(window_means(values, n_window).min())


@dataclass(frozen=True)
class ShiftFit:
    """Root of one moment equation."""

    mu: float
    clamped: bool
    iterations: int
    bracket: tuple


@dataclass(frozen=True)
class Calibration:
    mu_upper: float
    mu_lower: float
    window_n: int
    clamped: bool
    solver_iters: int
    bracket: tuple

    def to_dict(self) -> dict:
        return {"mu_upper": self.mu_upper, "mu_lower": self.mu_lower,
                "window_n": self.window_n, "clamped": self.clamped,
                "solver_iters": self.solver_iters, "bracket": list(self.bracket)}

    @classmethod
    def from_dict(cls, d: dict) -> Calibration:
        return cls(float(d["mu_upper"]), float(d["mu_lower"]), int(d["window_n"]),
                   bool(d["clamped"]), int(d["solver_iters"]), tuple(d["bracket"]))


NULL_CALIBRATION = Calibration(0.0, 0.0, 1, False, 0, (0.0, 0.0))


def moment_residual(decisions, labels, n_window, mu, upper=True) -> float:
    """``h(mu)``: extreme window mean of ``y - sigmoid(z + mu)``."""
    z = np.asarray(decisions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    means = window_means(y - expit(z + mu), n_window)
    return float(means.max() if upper else means.min())


def _solve(decisions, labels, n_window, clamp, tol, upper) -> ShiftFit:
    z = np.asarray(decisions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if z.shape != y.shape:
        raise CalibrationError("decisions and labels differ in length")
    if not np.isfinite(z).all():
        raise CalibrationError("decisions must be finite")
    _checked(z, n_window)

    def h(mu):
        return moment_residual(z, y, n_window, mu, upper)

    # h is strictly decreasing; widen [-r, r] until it changes sign
    r = min(INITIAL_BRACKET, clamp)
    iters = 0
    while True:
        lo, hi = -r, r
        h_lo, h_hi = h(lo), h(hi)
        iters += 2
        if h_lo == 0.0:
            return ShiftFit(lo, False, iters, (lo, hi))
        if h_hi == 0.0:
            return ShiftFit(hi, False, iters, (lo, hi))
        if h_lo > 0.0 > h_hi:
            break
        if r >= clamp:
            edge = -clamp if h_lo < 0.0 else clamp
            return ShiftFit(edge, True, iters, (lo, hi))
        r = min(2.0 * r, clamp)
    bracket = (lo, hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        h_mid = h(mid)
        iters += 1
        if h_mid == 0.0:
            return ShiftFit(mid, False, iters, bracket)
        if h_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return ShiftFit(0.5 * (lo + hi), False, iters, bracket)


def solve_mu_upper(decisions, labels, n_window, clamp=DEFAULT_CLAMP,
                   tol=DEFAULT_TOL) -> ShiftFit:
    """Upper mean shift from the max-mean moment condition."""
    return _solve(decisions, labels, n_window, clamp, tol, upper=True)


def solve_mu_lower(decisions, labels, n_window, clamp=DEFAULT_CLAMP,
                   tol=DEFAULT_TOL) -> ShiftFit:
    """Lower mean shift from the min-mean moment condition."""
    return _solve(decisions, labels, n_window, clamp, tol, upper=False)


def calibrate(decisions, labels, n_window, clamp=DEFAULT_CLAMP,
              tol=DEFAULT_TOL) -> Calibration:
    up = solve_mu_upper(decisions, labels, n_window, clamp, tol)
    low = solve_mu_lower(decisions, labels, n_window, clamp, tol)
    return Calibration(up.mu, low.mu, int(n_window), up.clamped or low.clamped,
                       up.iterations + low.iterations, up.bracket)


def upper_probability(z, mu_upper):
    return expit(np.asarray(z, dtype=np.float64) + mu_upper)


def lower_probability(z, mu_lower):
    return expit(np.asarray(z, dtype=np.float64) + mu_lower)


def classify_with_uncertainty(z, calibration) -> np.ndarray:
    """1 where the upper probability exceeds 0.5.

    ``calibration`` may be a :class:`Calibration` or a bare ``mu_upper``.
    """
    mu = calibration.mu_upper if isinstance(calibration, Calibration) else float(calibration)
    return (upper_probability(z, mu) > 0.5).astype(np.int64)


class SelectionMetric(str, Enum):
    BACC = "BACC"
    F_BETA = "F_BETA"


@dataclass(frozen=True)
class WindowGrid:
    candidates: tuple = DEFAULT_WINDOW_CANDIDATES
    selection_metric: SelectionMetric = SelectionMetric.BACC
    validation_fraction: float = 0.25

    def __post_init__(self):
        cands = tuple(int(c) for c in self.candidates)
        if not cands or min(cands) < 1:
            raise ValueError("window candidates must be non-empty and >= 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "selection_metric",
                           SelectionMetric(self.selection_metric))

    def scaled_to(self, n_train: int) -> WindowGrid:
        """Shrink candidates proportionally when the calibration slice is short.

        Candidates are kept when no larger than a quarter of the calibration
        slice; if none qualify, the grid is rescaled so its largest value
        equals that quarter.
        """
        n_cal = int(n_train * (1 - self.validation_fraction))
        cap = max(1, n_cal // 4)
        kept = tuple(c for c in self.candidates if c <= cap)
        if not kept:
            top = max(self.candidates)
            kept = tuple(sorted({max(1, c * cap // top) for c in self.candidates}))
        return WindowGrid(kept, self.selection_metric, self.validation_fraction)


def _score(metric, y_true, y_pred, beta):
    cm = confusion(y_true, y_pred)
    if metric is SelectionMetric.BACC:
        return bacc(cm)
    return f_beta(cm, beta)


def select_window_size(decisions, labels, grid: WindowGrid = WindowGrid(),
                       return_scores=False):
    """Grid-search the window size on a chronological hold-out tail.

    Each candidate is calibrated on the leading ``1 - validation_fraction`` of
    the sequence and scored on the rest; the best score wins, ties going to
    the smaller window.
    """
    z = np.asarray(decisions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    n_cal = int(round(z.shape[0] * (1 - grid.validation_fraction)))
    if n_cal < 1 or n_cal >= z.shape[0]:
        raise CalibrationError("too few samples for a validation split")
    z_cal, y_cal = z[:n_cal], y[:n_cal]
    z_val, y_val = z[n_cal:], y[n_cal:]
    beta = 0.0
    if grid.selection_metric is SelectionMetric.F_BETA:
        m_pos = int(y_cal.sum())
        m_neg = n_cal - m_pos
        beta = beta_from_counts(m_neg, m_pos) if m_pos and m_neg else 1.0
    scores = {}
    for n_window in sorted(set(grid.candidates)):
        if n_window > n_cal:
            continue
        fit = solve_mu_upper(z_cal, y_cal, n_window)
        pred = classify_with_uncertainty(z_val, fit.mu)
        scores[n_window] = _score(grid.selection_metric, y_val, pred, beta)
    if not scores:
        raise CalibrationError(
            f"no window candidate fits in {n_cal} calibration samples")
    best = max(scores.values())
    chosen = min(n for n, s in scores.items() if s == best)
    return (chosen, scores) if return_scores else chosen


class ResidualSource(str, Enum):
    IN_SAMPLE = "IN_SAMPLE"  # residuals of the model on its own training rows
    HOLDOUT = "HOLDOUT"      # model fitted on the leading rows, residuals on the tail


def fit_calibrated(fit, X, y, grid: WindowGrid = WindowGrid(),
                   source: ResidualSource = ResidualSource.IN_SAMPLE,
                   holdout_fraction: float = 0.3):
    """Fit a base model with ``fit(X, y)`` and calibrate its upper shift.

    Rows must be in chronological order. With ``IN_SAMPLE`` the model sees
    every row and the window search and root use its training decisions.
    With ``HOLDOUT`` the model is fitted on the leading
    ``1 - holdout_fraction`` of the rows and the calibration uses the
    decisions on the remaining tail, which the model never saw.
    Returns ``(model, calibration)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).reshape(-1)
    if ResidualSource(source) is ResidualSource.IN_SAMPLE:
        model = fit(X, y)
        z, y_cal = decision_function(model, X), y
    else:
        if not 0 < holdout_fraction < 1:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        n_fit = int(round(y.size * (1 - holdout_fraction)))
        if not 0 < n_fit < y.size:
            raise CalibrationError("too few rows for a hold-out slice")
        model = fit(X[:n_fit], y[:n_fit])
        z, y_cal = decision_function(model, X[n_fit:]), y[n_fit:]
    n_window = select_window_size(z, y_cal, grid.scaled_to(y_cal.size))
    return model, calibrate(z, y_cal, n_window)
