"""Baseline classifiers exposing raw decision values.

Both fitters standardize features with the training mean and standard
deviation. The SVM trains on internal labels in {-1, +1}; the decision value
is ``d(x) = sum_j alpha_j y_j K(x, sv_j) + bias`` with a Gaussian kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ._backend import kernels


class DegenerateFitError(ValueError):
    """Training data cannot support a fit (e.g. a single class)."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class TrainConfig:
    lr_max_iter: int = 100
    lr_tol: float = 1e-8
    lr_l2: float = 1e-6
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    # cap on SMO pair updates, in units of the training-set size
    svm_max_passes: int = 50
    gamma_policy: str | float = "scale"
    svm_kernel: str = "rbf"
    svm_cache_mb: int = 256

    def __post_init__(self):
        if self.lr_tol <= 0 or self.svm_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.svm_C <= 0:
            raise ValueError("svm_C must be positive")
        if self.lr_l2 < 0:
            raise ValueError("lr_l2 must be non-negative")
        if self.svm_kernel not in ("rbf", "linear"):
            raise ValueError("svm_kernel must be 'rbf' or 'linear'")
        if self.gamma_policy != "scale" and not float(self.gamma_policy) > 0:
            raise ValueError("gamma_policy must be 'scale' or a positive number")


def fit_standardizer(X):
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one row per label")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite entries")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if X.shape[0] < 2 or y.min() == y.max():
        raise DegenerateFitError("training data must contain both classes")
    return X, y


def _as_row(x, dim):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != dim:
        raise ValueError(f"expected {dim} features, got {x.shape[0]}")
    return x


# -- logistic regression ----------------------------------------------------

@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    mean: np.ndarray
    scale: np.ndarray
    n_iter: int = 0
    loss_history: tuple = field(default=(), compare=False)

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]


def logistic_objective(params, X, y, l2=0.0):
    """Mean negative log-likelihood plus ``l2/2 * |w|^2``; intercept is last.

    Returns ``(loss, gradient)``.
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = (expit(z) - y) / X.shape[0]
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    return float(loss), grad


def fit_logistic(X, y, cfg: TrainConfig = TrainConfig()) -> LogisticModel:
    """Penalized maximum likelihood by damped Newton iterations."""
    X, y = _check_xy(X, y)
    mean, scale = fit_standardizer(X)
    Xs = (X - mean) / scale
    n, d = Xs.shape
    A = np.hstack([Xs, np.ones((n, 1))])
    params = np.zeros(d + 1)
    loss, grad = logistic_objective(params, Xs, y, cfg.lr_l2)
    history = [loss]
    ridge = np.full(d + 1, cfg.lr_l2)
    ridge[-1] = 0.0
    it = 0
    while np.linalg.norm(grad) > cfg.lr_tol and it < cfg.lr_max_iter:
        p = expit(A @ params)
        H = (A * (p * (1 - p))[:, None]).T @ A / n + np.diag(ridge)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        slope = grad @ step
        for _ in range(60):
            cand = params - t * step
            cand_loss, cand_grad = logistic_objective(cand, Xs, y, cfg.lr_l2)
            if cand_loss <= loss - 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break  # no further decrease representable
        params, loss, grad = cand, cand_loss, cand_grad
        history.append(loss)
        it += 1
    gnorm = float(np.linalg.norm(grad))
    if gnorm > cfg.lr_tol:
        raise ConvergenceError(
            f"logistic fit stopped with gradient norm {gnorm:.3e}",
            iterations=it, grad_norm=gnorm, loss=loss)
    return LogisticModel(params[:-1].copy(), float(params[-1]), mean, scale,
                         it, tuple(history))


def lr_decision(model: LogisticModel, x) -> float:
    x = _as_row(x, model.n_features)
    return float(((x - model.mean) / model.scale) @ model.weights + model.intercept)


# -- SVM ----------------------------------------------------------------------

_KERNEL_CODE = {"rbf": 0, "linear": 1}


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray  # standardized
    coefficients: np.ndarray     # alpha_j * y_j
    bias: float
    gamma: float
    cost: float
    mean: np.ndarray
    scale: np.ndarray
    kernel: str = "rbf"
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]


def gaussian_kernel(x, x2, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    x2 = np.asarray(x2, dtype=np.float64).reshape(-1)
    if x.shape != x2.shape:
        raise ValueError("kernel arguments differ in dimension")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    diff = x - x2
    return float(np.exp(-gamma * (diff @ diff)))


def default_gamma(X) -> float:
    """``1 / (d * mean per-feature variance)``, or ``1/d`` for constant data."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    var = X.var(axis=0).mean()
    return 1.0 / d if var == 0 else float(1.0 / (d * var))


def fit_svm(X, y, cfg: TrainConfig = TrainConfig()) -> SvmModel:
    """C-SVC by SMO with second-order working-set selection (deterministic)."""
    X, y = _check_xy(X, y)
    mean, scale = fit_standardizer(X)
    Xs = np.ascontiguousarray((X - mean) / scale)
    ys = np.where(y == 1, 1.0, -1.0)
    n = Xs.shape[0]
    gamma = default_gamma(Xs) if cfg.gamma_policy == "scale" else float(cfg.gamma_policy)
    cache_rows = max(2, int(cfg.svm_cache_mb * 2 ** 20 // (8 * n)))
    max_iter = int(cfg.svm_max_passes) * max(n, 100)
    alpha, bias, n_iter, converged = kernels.smo_solve(
        Xs, ys, float(cfg.svm_C), gamma, _KERNEL_CODE[cfg.svm_kernel],
        float(cfg.svm_tol), max_iter, cache_rows)
    if not converged:
        raise ConvergenceError(
            f"SMO did not reach tolerance {cfg.svm_tol} in {n_iter} updates",
            iterations=n_iter)
    sv = alpha > 0
    return SvmModel(Xs[sv].copy(), (alpha * ys)[sv], float(bias), gamma,
                    float(cfg.svm_C), mean, scale, cfg.svm_kernel, int(n_iter))


def svm_decision(model: SvmModel, x) -> float:
    x = _as_row(x, model.n_features)
    return float(decision_function(model, x[None, :])[0])


def dual_coefficients(model: SvmModel) -> np.ndarray:
    """Recover alpha_j (all positive) from the stored signed coefficients."""
    return np.abs(model.coefficients)


# -- shared -------------------------------------------------------------------

def decision_function(model, X) -> np.ndarray:
    """Raw decision values ``z`` (LR) or ``d(x)`` (SVM) for rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    Xs = (X - model.mean) / model.scale
    if isinstance(model, LogisticModel):
        return Xs @ model.weights + model.intercept
    return kernels.decision_values(
        np.ascontiguousarray(Xs), np.ascontiguousarray(model.support_vectors),
        np.ascontiguousarray(model.coefficients), model.bias, model.gamma,
        _KERNEL_CODE[model.kernel])


def predict_base(model, X) -> np.ndarray:
    """Plain classifier output: 1 where ``sigmoid(decision) > 0.5``."""
    return (expit(decision_function(model, X)) > 0.5).astype(np.int64)
