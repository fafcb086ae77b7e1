"""Versioned JSON model artifacts.

Layout (``format = "muhf-model"``, ``version = 1``)::

    {
      "format": "muhf-model", "version": 1,
      "kind": "logistic" | "svm",
      "n_features": int,
      "standardization": {"mean": [...], "scale": [...]},
      # logistic
      "weights": [...], "intercept": float,
      # svm
      "kernel": "rbf" | "linear", "gamma": float, "cost": float,
      "bias": float, "support_vectors": [[...], ...], "coefficients": [...],
      "calibration": null | {"mu_upper", "mu_lower", "window_n", "clamped",
                             "solver_iters", "bracket"}
    }

Floats are written with ``repr`` precision so reloads are bit-exact.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .calibration import Calibration
from .classifiers import LogisticModel, SvmModel

FORMAT = "muhf-model"
VERSION = 1


def model_to_dict(model, calibration: Calibration | None = None) -> dict:
    if not isinstance(model, (LogisticModel, SvmModel)):
        raise TypeError(f"unsupported model type {type(model).__name__}")
    base = {
        "format": FORMAT, "version": VERSION,
        "n_features": int(model.n_features),
        "standardization": {"mean": model.mean.tolist(), "scale": model.scale.tolist()},
    }
    if isinstance(model, LogisticModel):
        base.update(kind="logistic", weights=model.weights.tolist(),
                    intercept=float(model.intercept))
    else:
        base.update(kind="svm", kernel=model.kernel, gamma=float(model.gamma),
                    cost=float(model.cost), bias=float(model.bias),
                    support_vectors=model.support_vectors.tolist(),
                    coefficients=model.coefficients.tolist())
    base["calibration"] = calibration.to_dict() if calibration else None
    return base


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ValueError("not a model artifact")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported artifact version {d.get('version')}")
    n_f = int(d["n_features"])
    mean = np.array(d["standardization"]["mean"], dtype=np.float64)
    scale = np.array(d["standardization"]["scale"], dtype=np.float64)
    if d["kind"] == "logistic":
        model = LogisticModel(np.array(d["weights"], dtype=np.float64),
                              float(d["intercept"]), mean, scale)
    elif d["kind"] == "svm":
        sv = np.array(d["support_vectors"], dtype=np.float64).reshape(-1, n_f)
        model = SvmModel(sv, np.array(d["coefficients"], dtype=np.float64),
                         float(d["bias"]), float(d["gamma"]), float(d["cost"]),
                         mean, scale, d["kernel"])
    else:
        raise ValueError(f"unknown model kind {d['kind']!r}")
    cal = d.get("calibration")
    return model, (Calibration.from_dict(cal) if cal else None)


def save_model(model, path, calibration: Calibration | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, calibration), indent=1) + "\n",
                          encoding="utf-8")


def load_model(path):
    """Returns ``(model, calibration_or_None)``."""
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
