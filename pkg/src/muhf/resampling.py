"""SMOTE oversampling and random undersampling of the majority class."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class ResampleError(ValueError):
    pass


class Method(str, Enum):
    SMOTE = "SMOTE"
    RUS = "RUS"


@dataclass(frozen=True)
class ResampleConfig:
    method: Method = Method.SMOTE
    k_neighbors: int = 5
    target_ratio: float = 1.0  # minority : majority after resampling
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not self.target_ratio > 0:
            raise ValueError("target_ratio must be positive")


def nearest_neighbors(X, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other rows (Euclidean, stable tie order)."""
    X = np.asarray(X, dtype=np.float64)
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def smote(X_min, n_synthetic: int, cfg: ResampleConfig = ResampleConfig(), rng=None,
          scale=None):
    """Interpolate ``n_synthetic`` points between minority rows and their neighbours.

    Each synthetic point is ``x + u * (x_nn - x)`` with a uniformly chosen base
    row, one of its ``k`` nearest minority neighbours, and ``u ~ U[0, 1]``.
    Neighbours are found on ``X_min / scale`` (per-feature scale, default 1).
    ``rng`` overrides the generator seeded from ``cfg.seed``.
    """
    X_min = np.asarray(X_min, dtype=np.float64)
    m = X_min.shape[0]
    if m < 2 or cfg.k_neighbors >= m:
        raise ResampleError(
            f"SMOTE needs more than k={cfg.k_neighbors} minority rows (got {m}); "
            "use RUS for this fold instead")
    if n_synthetic <= 0:
        return np.empty((0, X_min.shape[1]))
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    metric_X = X_min if scale is None else X_min / np.asarray(scale, dtype=np.float64)
    nn = nearest_neighbors(metric_X, cfg.k_neighbors)
    base = rng.integers(0, m, size=n_synthetic)
    pick = rng.integers(0, cfg.k_neighbors, size=n_synthetic)
    u = rng.random(n_synthetic)
    x = X_min[base]
    return x + u[:, None] * (X_min[nn[base, pick]] - x)


def rus_indices(n_rows: int, target_count: int, seed) -> np.ndarray:
    if not 0 < target_count <= n_rows:
        raise ResampleError(
            f"cannot keep {target_count} of {n_rows} majority rows")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_rows, size=target_count, replace=False))


def rus(X_maj, target_count: int, seed) -> np.ndarray:
    """Uniform sample of rows without replacement, in original order."""
    X_maj = np.asarray(X_maj)
    return X_maj[rus_indices(X_maj.shape[0], target_count, seed)]


def rebalance(X, y, cfg: ResampleConfig = ResampleConfig()):
    """Resample so that minority:majority equals ``target_ratio``.

    Minority rows are always kept. SMOTE measures neighbour distances on
    features scaled by the standard deviation of all of ``X``, and appends synthetic minority rows after
    the originals; RUS drops majority rows while keeping the original order.
    Inputs already at or above the target ratio are returned unchanged.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).reshape(-1)
    counts = np.bincount(y, minlength=2)
    if counts.min() == 0:
        raise ResampleError("rebalance needs both classes")
    minority = int(np.argmin(counts)) if counts[0] != counts[1] else 1
    n_min, n_maj = int(counts[minority]), int(counts[1 - minority])
    if n_min >= cfg.target_ratio * n_maj:
        return X.copy(), y.copy()
    if cfg.method is Method.SMOTE:
        target = math.ceil(n_maj * cfg.target_ratio)
        std = X.std(axis=0)
        synth = smote(X[y == minority], target - n_min, cfg,
                      scale=np.where(std > 0, std, 1.0))
        X_out = np.vstack([X, synth])
        y_out = np.concatenate([y, np.full(synth.shape[0], minority)])
        return X_out, y_out
    keep_maj = max(1, min(n_maj, int(round(n_min / cfg.target_ratio))))
    maj_idx = np.nonzero(y != minority)[0]
    chosen = maj_idx[rus_indices(n_maj, keep_maj, cfg.seed)]
    keep = np.sort(np.concatenate([np.nonzero(y == minority)[0], chosen]))
    return X[keep], y[keep]
