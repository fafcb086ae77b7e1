import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit, logit

from muhf.calibration import (DEFAULT_CLAMP, NULL_CALIBRATION, Calibration, CalibrationError,
                              ResidualSource, SelectionMetric, WindowGrid, calibrate,
                              classify_with_uncertainty, fit_calibrated, lower_probability,
                              max_mean, min_mean, moment_residual, select_window_size,
                              solve_mu_lower, solve_mu_upper, upper_probability, window_means)
from muhf.classifiers import decision_function, fit_logistic, fit_svm, predict_base


def brute_window_means(v, n):
    return [sum(v[k:k + n]) / n for k in range(len(v) - n + 1)]


def test_window_means_examples():
    np.testing.assert_allclose(window_means([0.2, -0.1, 0.4, 0.0], 2), [0.05, 0.15, 0.2],
                               atol=1e-15)
    v = [0.3, -2.0, 5.5]
    assert window_means(v, 1).tolist() == v
    assert window_means([1.5] * 7, 3).tolist() == [1.5] * 5
    with pytest.raises(CalibrationError):
        window_means([1.0, 2.0], 3)
    with pytest.raises(CalibrationError):
        window_means([1.0, 2.0], 0)


def test_max_min_mean_examples():
    v = [0.2, -0.1, 0.4, 0.0]
    assert max_mean(v, 2) == pytest.approx(0.2, abs=1e-15)
    assert min_mean(v, 2) == pytest.approx(0.05, abs=1e-15)
    assert max_mean(v, 4) == min_mean(v, 4) == pytest.approx(np.mean(v), abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=200), st.integers(1, 20))
def test_max_min_mean_equal_brute_force_on_dyadic_values(ints, n):
    # dyadic values keep every partial sum exact, so equality is exact
    v = [i / 64 for i in ints]
    n = min(n, len(v))
    brute = brute_window_means(v, n)
    assert max_mean(v, n) == max(brute)
    assert min_mean(v, n) == min(brute)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=100), st.integers(1, 20))
def test_mean_is_bracketed_when_windows_tile(v, n):
    # the overall mean is an average of disjoint window means when n divides len(v)
    n = min(n, len(v))
    v = v[:len(v) - len(v) % n]
    m = math.fsum(v) / len(v)
    assert min_mean(v, n) <= m + 1e-12 and m <= max_mean(v, n) + 1e-12


def test_mean_can_escape_overlapping_windows():
    assert min_mean([0.0, 1.0, 0.0], 2) == 0.5 > 1 / 3


def test_single_window_closed_form():
    fit = solve_mu_upper([0, 0, 0, 0], [1, 0, 1, 1], 4)
    assert fit.mu == pytest.approx(math.log(3), abs=1e-9) and not fit.clamped
    low = solve_mu_lower([0, 0, 0, 0], [1, 0, 1, 1], 4)
    assert low.mu == pytest.approx(fit.mu, abs=1e-10)


def test_lower_root_uses_min_window():
    y = [1, 0, 0, 0, 1, 1, 1, 1]
    low = solve_mu_lower([0.0] * 8, y, 4)
    assert low.mu == pytest.approx(logit(0.25), abs=1e-9)
    up = solve_mu_upper([0.0] * 8, y, 4)
    assert up.clamped and up.mu == DEFAULT_CLAMP


def test_no_positive_evidence_clamps_low():
    fit = solve_mu_upper(np.zeros(10), np.zeros(10), 3)
    assert fit.clamped and fit.mu == -DEFAULT_CLAMP
    cal = calibrate(np.zeros(10), np.zeros(10), 3)
    assert cal.clamped and classify_with_uncertainty(np.linspace(-5, 5, 11), cal).sum() == 0


def test_solver_errors():
    with pytest.raises(CalibrationError):
        solve_mu_upper([0.0, 1.0], [0, 1], 3)
    with pytest.raises(CalibrationError):
        solve_mu_upper([0.0, np.inf], [0, 1], 1)
    with pytest.raises(CalibrationError):
        solve_mu_upper([0.0, 1.0], [0, 1, 1], 1)


def _instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 300))
    z = rng.normal(-1, 2, n)
    y = (rng.random(n) < expit(z + rng.normal(0, 1))).astype(int)
    if y.min() == y.max():
        y[n // 2] = 1 - y[n // 2]
    return z, y, int(rng.integers(1, min(n, 40) + 1))


@pytest.mark.parametrize("seed", range(100))
def test_root_residual_and_monotonicity(seed):
    z, y, n = _instance(seed)
    fit = solve_mu_upper(z, y, n)
    if fit.clamped:
        return
    assert abs(moment_residual(z, y, n, fit.mu)) <= 1e-9
    lo, hi = fit.bracket
    assert moment_residual(z, y, n, lo) > 0 > moment_residual(z, y, n, hi)


def test_lower_not_above_upper():
    for seed in range(500):
        z, y, n = _instance(seed)
        cal = calibrate(z, y, n)
        if not cal.clamped:
            assert cal.mu_lower <= cal.mu_upper


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_shift_equivariance(seed, c):
    z, y, n = _instance(seed)
    a = solve_mu_upper(z, y, n)
    b = solve_mu_upper(z + c, y, n)
    if a.clamped or b.clamped or abs(a.mu) > 4 or abs(b.mu) > 4:
        return
    assert b.mu == pytest.approx(a.mu - c, abs=1e-9)
    # predictions can only differ for points within solver tolerance of the boundary
    edge = np.abs(z + a.mu) < 1e-8
    same = classify_with_uncertainty(z, a.mu) == classify_with_uncertainty(z + c, b.mu)
    assert (same | edge).all()


def test_probability_examples():
    assert upper_probability(0.0, 0.0) == 0.5
    z = np.linspace(-6, 6, 101)
    np.testing.assert_array_equal(upper_probability(z, 0.0), expit(z))
    assert upper_probability(-1.0, math.log(3)) == pytest.approx(1 / (1 + math.e / 3), abs=1e-15)
    assert (upper_probability(z, 0.7) >= lower_probability(z, -0.2)).all()


def test_classify_examples():
    assert classify_with_uncertainty([0.0], 1.0).tolist() == [1]
    assert classify_with_uncertainty([-2.0], 1.0).tolist() == [0]
    cal = Calibration(0.37, -0.5, 10, False, 5, (-8.0, 8.0))
    lo, hi = -10.0, 10.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if classify_with_uncertainty([mid], cal)[0]:
            hi = mid
        else:
            lo = mid
    assert hi == pytest.approx(-0.37, abs=1e-10)


def test_degeneracy_with_zero_shift():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 4))
    y = (X[:, 0] + rng.standard_normal(200) > 1.2).astype(int)
    probe = rng.standard_normal((1000, 4)) * 2
    for fit in (fit_logistic, fit_svm):
        m = fit(X, y)
        z = decision_function(m, probe)
        np.testing.assert_array_equal(classify_with_uncertainty(z, NULL_CALIBRATION),
                                      predict_base(m, probe))


def _selection_fixture():
    # calibration part: z = 0, a dense block of positives at the start
    y_cal = [1, 1, 1, 1, 0, 1, 1, 0] + [0] * 22
    # validation tail: positives score 0, negatives score -10
    y_val = [1, 0, 0, 1, 0, 0, 0, 1, 0, 0]
    z = [0.0] * 30 + [0.0 if v else -10.0 for v in y_val]
    return np.array(z), np.array(y_cal + y_val)


def test_window_selection_fixture():
    z, y = _selection_fixture()
    grid = WindowGrid((2, 8, 30))
    chosen, scores = select_window_size(z, y, grid, return_scores=True)
    # N=2 clamps high and flags everything, N=30 shifts below the positives
    assert calibrate(z[:30], y[:30], 2).clamped
    assert solve_mu_upper(z[:30], y[:30], 30).mu < 0
    assert scores == {2: 0.5, 8: 1.0, 30: 0.5}
    assert chosen == 8
    assert select_window_size(z, y, WindowGrid((30, 8, 2))) == 8
    assert select_window_size(z, y, WindowGrid((30,))) == 30
    assert select_window_size(z, y, WindowGrid((2, 30))) == 2  # tie goes to the smaller
    f = select_window_size(z, y, WindowGrid((2, 8, 30), SelectionMetric.F_BETA))
    assert f == 8


def test_window_selection_errors():
    z, y = _selection_fixture()
    with pytest.raises(CalibrationError):
        select_window_size(z, y, WindowGrid((31, 50)))
    with pytest.raises(ValueError):
        WindowGrid(())
    with pytest.raises(ValueError):
        WindowGrid((5,), validation_fraction=1.0)


def test_grid_scaling():
    g = WindowGrid()
    # a quarter of the calibration slice caps the candidates
    assert g.scaled_to(10_000).candidates == (50, 100, 200, 400)
    assert g.scaled_to(1000).candidates == (50, 100)
    assert g.scaled_to(200).candidates == (4, 9, 18, 37)
    assert g.scaled_to(40).candidates == (1, 3, 7)


def test_calibration_round_trip():
    cal = Calibration(1.0986122886681098, -0.25, 200, False, 73, (-8.0, 8.0))
    assert Calibration.from_dict(cal.to_dict()) == cal


def _latent(seed, n=1200):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 5))
    z = X @ np.array([1.0, 0.6, 0.3, 0.0, 0.0]) + rng.logistic(size=n)
    return X, (z > np.quantile(z, 0.9)).astype(int)


@pytest.mark.parametrize("source", list(ResidualSource))
def test_fit_calibrated_sources(source):
    X, y = _latent(1)
    grid = WindowGrid((20, 40, 80))
    calls = []

    def fit(Xf, yf):
        calls.append(len(yf))
        return fit_logistic(Xf, yf)

    model, cal = fit_calibrated(fit, X, y, grid, source, holdout_fraction=0.25)
    assert calls == ([1200] if source is ResidualSource.IN_SAMPLE else [900])
    n_cal = 1200 if source is ResidualSource.IN_SAMPLE else 300
    z = decision_function(model, X[-n_cal:])
    assert cal.window_n in grid.scaled_to(n_cal).candidates
    assert cal == calibrate(z, y[-n_cal:], cal.window_n)
    # the shift raises the minority recall over the base classifier
    pred = classify_with_uncertainty(decision_function(model, X), cal)
    assert pred[y == 1].mean() > predict_base(model, X)[y == 1].mean()


def test_fit_calibrated_rejects_bad_holdout():
    X, y = _latent(2, n=100)
    with pytest.raises(ValueError):
        fit_calibrated(fit_logistic, X, y, source=ResidualSource.HOLDOUT, holdout_fraction=1)


def test_maximal_distribution_blocks():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = sorted(rng.choice(np.arange(-8, 9) / 4, 2, replace=False))
        blocks = rng.integers(1, 12, rng.integers(1, 15))
        seq = np.concatenate([np.full(k, a if rng.random() < 0.5 else b) for k in blocks])
        n = int(rng.integers(1, seq.size + 1))
        mm = max_mean(seq, n)
        assert a <= mm <= b
        run = max((len(list(g)) for v, g in itertools.groupby(seq) if v == b), default=0)
        assert (mm == b) == (run >= n)
