"""Model backends and their published default hyperparameters.

Two kinds are served: "tabpfn" (the pre-trained tabular foundation
model, if its package is installed) and "gbt" (gradient-boosted trees).
Per-task defaults below are the tuned values shipped with this host;
anything in the session's hparams overrides them.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

N_CLASSES = 3

TABPFN_DEFAULTS = {
    "VENT": {"n_estimators": 31, "softmax_temperature": 0.718,
             "average_before_softmax": True},
    "ADAS": {"n_estimators": 9, "softmax_temperature": 1.212,
             "average_before_softmax": True},
    "DX": {"n_estimators": 25, "softmax_temperature": 1.981,
           "average_before_softmax": True},
}

GBT_DEFAULTS = {
    "VENT": {"max_depth": 3, "subsample": 0.5826, "learning_rate": 0.0149,
             "n_estimators": 650},
    "ADAS": {"max_depth": 4, "subsample": 0.5464, "learning_rate": 0.0138,
             "n_estimators": 500},
    "DX": {"max_depth": 3, "subsample": 0.4618, "learning_rate": 0.0102,
           "n_estimators": 850},
}


def resolve_hparams(kind: str, task: str, hparams: dict) -> dict:
    defaults = (TABPFN_DEFAULTS if kind == "tabpfn" else GBT_DEFAULTS)[task]
    merged = dict(defaults)
    for key, value in hparams.items():
        if key in ("kind", "seed"):
            continue
        merged[key] = value
    return merged


class ModelError(Exception):
    pass


def _to_matrix(rows: list[list[Optional[float]]]) -> np.ndarray:
    matrix = np.array([[np.nan if v is None else float(v) for v in row]
                       for row in rows], dtype=float)
    return matrix


class _Imputer:
    """Column medians from the training matrix; all-missing columns get 0.
    This is the GBT backend's missing-value policy, applied identically
    at fit and predict time."""

    def fit(self, matrix: np.ndarray) -> "_Imputer":
        with np.errstate(all="ignore"):
            medians = np.nanmedian(matrix, axis=0)
        self.fill = np.where(np.isfinite(medians), medians, 0.0)
        return self

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        out = matrix.copy()
        mask = np.isnan(out)
        out[mask] = np.broadcast_to(self.fill, out.shape)[mask]
        return out


class GbtModel:
    """Gradient-boosted trees with the shared hyperparameter surface
    (max_depth, subsample, learning_rate, n_estimators)."""

    def __init__(self, task: str, hparams: dict, seed: int):
        from sklearn.ensemble import (GradientBoostingClassifier,
                                      GradientBoostingRegressor)

        params = resolve_hparams("gbt", task, hparams)
        kwargs = {
            "max_depth": int(params["max_depth"]),
            "subsample": float(params["subsample"]),
            "learning_rate": float(params["learning_rate"]),
            "n_estimators": int(params["n_estimators"]),
            "random_state": seed,
        }
        self.task = task
        if task == "DX":
            self.model = GradientBoostingClassifier(**kwargs)
        else:
            self.model = GradientBoostingRegressor(**kwargs)
        self.imputer = _Imputer()

    def fit(self, x_rows, y_values):
        x = self.imputer.fit(_to_matrix(x_rows)).apply(_to_matrix(x_rows))
        if self.task == "DX":
            y = np.array([int(v) for v in y_values])
        else:
            y = np.array([float(v) for v in y_values])
        self.model.fit(x, y)

    def predict_one(self, x_row):
        x = self.imputer.apply(_to_matrix([x_row]))
        if self.task == "DX":
            probs = np.zeros(N_CLASSES)
            for cls, p in zip(self.model.classes_,
                              self.model.predict_proba(x)[0]):
                probs[int(cls)] = p
            probs = np.clip(probs, 0.0, None)
            probs /= probs.sum()
            return {"p": [float(v) for v in probs]}
        value = float(self.model.predict(x)[0])
        if not np.isfinite(value):
            raise ModelError("regression produced a non-finite value")
        return {"yhat": value}


class TabpfnModel:
    """Pre-trained tabular foundation model; predicts in one forward pass
    over the training context, no gradient updates."""

    def __init__(self, task: str, hparams: dict, seed: int):
        try:
            from tabpfn import TabPFNClassifier, TabPFNRegressor
        except ImportError as exc:
            raise ModelError(
                f"tabpfn package not installed: {exc}; install the "
                "'tabpfn' extra of modelhost") from exc

        params = resolve_hparams("tabpfn", task, hparams)
        kwargs = {
            "n_estimators": int(params["n_estimators"]),
            "softmax_temperature": float(params["softmax_temperature"]),
            "average_before_softmax": bool(params["average_before_softmax"]),
            "random_state": seed,
        }
        self.task = task
        if task == "DX":
            self.model = TabPFNClassifier(**kwargs)
        else:
            self.model = TabPFNRegressor(**kwargs)
        self._x_test_cache = None

    def fit(self, x_rows, y_values):
        x = _to_matrix(x_rows)
        if self.task == "DX":
            y = np.array([int(v) for v in y_values])
        else:
            y = np.array([float(v) for v in y_values])
        self.model.fit(x, y)

    def predict_one(self, x_row):
        x = _to_matrix([x_row])
        if self.task == "DX":
            probs = np.zeros(N_CLASSES)
            for cls, p in zip(self.model.classes_,
                              self.model.predict_proba(x)[0]):
                probs[int(cls)] = p
            probs = np.clip(probs, 0.0, None)
            probs /= probs.sum()
            return {"p": [float(v) for v in probs]}
        value = float(self.model.predict(x)[0])
        if not np.isfinite(value):
            raise ModelError("regression produced a non-finite value")
        return {"yhat": value}


def build_model(kind: str, task: str, hparams: dict, seed: int):
    if kind == "gbt":
        return GbtModel(task, hparams, seed)
    if kind == "tabpfn":
        return TabpfnModel(task, hparams, seed)
    raise ModelError(f"unknown model kind {kind!r}")
