"""Predictor contract and built-in baselines.

The built-ins (constant-median, carry-forward, k-nearest-neighbours) keep
the pipeline runnable standalone; learned models attach as external
processes through the bridge kind.
"""

from __future__ import annotations

import csv
import io
import math
import shlex
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .cohort import Task
from .errors import ConfigError, ContractViolation, ParseError
from .summaries import L2CRow
from .tables import FeatureTable

PROB_COLUMNS = ("p_CN", "p_MCI", "p_AD")
N_CLASSES = 3
KINDS = ("constant-median", "carry-forward", "knn", "bridge")


@dataclass(frozen=True)
class PredictorConfig:
    kind: str
    task: Task
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown predictor kind {self.kind!r}")
        if self.kind == "knn":
            k = self.hyperparameters.get("k")
            if not isinstance(k, int) or k < 1:
                raise ConfigError("knn requires integer hyperparameter k >= 1")
        if self.kind == "bridge" and not self.hyperparameters.get("host_cmd"):
            raise ConfigError("bridge requires hyperparameter host_cmd")


@dataclass(frozen=True)
class PredictionRecord:
    patient_id: str
    target_month: float
    probs: Optional[tuple[float, float, float]] = None
    estimate: Optional[float] = None

    def validate(self, task: Task) -> None:
        if task is Task.DX:
            if self.probs is None:
                raise ContractViolation("DX prediction needs probabilities")
            if any(not 0.0 <= p <= 1.0 for p in self.probs):
                raise ContractViolation(f"probability outside [0,1]: {self.probs}")
            if abs(sum(self.probs) - 1.0) > 1e-9:
                raise ContractViolation(
                    f"probabilities sum to {sum(self.probs)!r}, not 1")
        else:
            if self.estimate is None or not math.isfinite(self.estimate):
                raise ContractViolation(f"estimate not finite: {self.estimate!r}")


def fit_predict(train: FeatureTable, test: FeatureTable,
                config: PredictorConfig) -> list[PredictionRecord]:
    """One prediction per test row, in test-row order, deterministically."""
    if (train.schema.task is not test.schema.task
            or train.schema.feature_names != test.schema.feature_names):
        raise ContractViolation("train and test tables must share a schema")
    if config.task is not train.schema.task:
        raise ContractViolation("predictor task does not match the tables")

    if config.kind == "bridge":
        from .bridge import bridge_session  # local import, avoids cycle
        hparams = dict(config.hyperparameters)
        host_cmd = hparams.pop("host_cmd")
        if isinstance(host_cmd, str):
            host_cmd = shlex.split(host_cmd)
        timeout = float(hparams.pop("timeout", 3600.0))
        records = bridge_session(host_cmd, config.task, hparams, train, test,
                                 timeout=timeout)
    elif config.kind == "constant-median":
        records = _constant_median(train, test, config.task)
    elif config.kind == "carry-forward":
        records = _carry_forward(train, test, config.task)
    else:
        records = _knn(train, test, config.task,
                       int(config.hyperparameters["k"]))

    for record in records:
        record.validate(config.task)
    return records


def _train_targets(train: FeatureTable) -> list[float]:
    targets = [row.target for row in train.rows if row.target is not None]
    if not targets:
        raise ConfigError("training table has no target values to fit on")
    return targets


def _class_frequencies(targets: Sequence[float]) -> tuple[float, ...]:
    counts = np.zeros(N_CLASSES)
    for t in targets:
        counts[int(t)] += 1
    return tuple(counts / counts.sum())


def _one_hot(cls: int) -> tuple[float, ...]:
    probs = [0.0] * N_CLASSES
    probs[cls] = 1.0
    return tuple(probs)


def _constant_median(train, test, task) -> list[PredictionRecord]:
    targets = _train_targets(train)
    if task is Task.DX:
        probs = _class_frequencies(targets)
        return [PredictionRecord(r.patient_id, r.target_month, probs=probs)
                for r in test.rows]
    center = float(np.median(targets))
    return [PredictionRecord(r.patient_id, r.target_month, estimate=center)
            for r in test.rows]


def _carry_forward(train, test, task) -> list[PredictionRecord]:
    """Last observation carried forward, via the row's mr_target column;
    rows with no observed history value fall back to the constant baseline."""
    targets = _train_targets(train)
    if task is Task.DX:
        fallback = _class_frequencies(targets)
        out = []
        for row in test.rows:
            last = row.features.get("mr_target")
            probs = fallback if last is None else _one_hot(int(last))
            out.append(PredictionRecord(row.patient_id, row.target_month,
                                        probs=probs))
        return out
    center = float(np.median(targets))
    return [PredictionRecord(
                r.patient_id, r.target_month,
                estimate=center if r.features.get("mr_target") is None
                else float(r.features["mr_target"]))
            for r in test.rows]


def _feature_matrix(rows: Sequence[L2CRow], columns: Sequence[str]) -> np.ndarray:
    matrix = np.full((len(rows), len(columns)), np.nan)
    for i, row in enumerate(rows):
        for j, name in enumerate(columns):
            value = row.features.get(name)
            if value is not None:
                matrix[i, j] = value
    return matrix


def train_feature_scale(train: FeatureTable) -> dict[str, float]:
    """Per-feature standard deviation over observed training values.

    Columns that are constant or never observed get no entry and are
    skipped by the distance.
    """
    columns = train.schema.model_columns
    matrix = _feature_matrix(train.rows, columns)
    scale = {}
    for j, name in enumerate(columns):
        observed = matrix[:, j][~np.isnan(matrix[:, j])]
        if len(observed) >= 2:
            sigma = float(np.std(observed, ddof=0))
            if math.isfinite(sigma) and sigma > 0.0:
                scale[name] = sigma
    return scale


def knn_distance(a: L2CRow, b: L2CRow, scale: Mapping[str, float]) -> float:
    """Root-mean-square of per-feature scaled differences over the fields
    present in both rows; +inf when the rows share no field."""
    total = 0.0
    shared = 0
    for name, sigma in scale.items():
        va, vb = a.features.get(name), b.features.get(name)
        if va is None or vb is None:
            continue
        z = (va - vb) / sigma
        total += z * z
        shared += 1
    if shared == 0:
        return math.inf
    return math.sqrt(total / shared)


def _knn(train, test, task, k) -> list[PredictionRecord]:
    targets = _train_targets(train)
    fit_rows = [row for row in train.rows if row.target is not None]
    columns = train.schema.model_columns
    scale = train_feature_scale(train)
    scaled_cols = [j for j, name in enumerate(columns) if name in scale]
    sigmas = np.array([scale[columns[j]] for j in scaled_cols])

    x_train = _feature_matrix(fit_rows, columns)[:, scaled_cols] / sigmas
    x_test = _feature_matrix(test.rows, columns)[:, scaled_cols] / sigmas
    y_train = np.array([row.target for row in fit_rows])

    if task is Task.DX:
        fallback_probs = _class_frequencies(targets)
    else:
        fallback = float(np.median(targets))

    records = []
    for i, row in enumerate(test.rows):
        diff = x_test[i] - x_train
        valid = ~np.isnan(diff)
        counts = valid.sum(axis=1)
        sq = np.where(valid, diff, 0.0) ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            dist = np.sqrt(sq.sum(axis=1) / counts)
        dist[counts == 0] = np.inf

        order = np.argsort(dist, kind="stable")       # ties by train index
        neighbors = [idx for idx in order[:k] if np.isfinite(dist[idx])]
        if not neighbors:
            if task is Task.DX:
                records.append(PredictionRecord(row.patient_id,
                                                row.target_month,
                                                probs=fallback_probs))
            else:
                records.append(PredictionRecord(row.patient_id,
                                                row.target_month,
                                                estimate=fallback))
            continue
        votes = y_train[neighbors]
        if task is Task.DX:
            counts3 = np.zeros(N_CLASSES)
            for v in votes:
                counts3[int(v)] += 1
            probs = tuple(counts3 / counts3.sum())
            records.append(PredictionRecord(row.patient_id, row.target_month,
                                            probs=probs))
        else:
            records.append(PredictionRecord(row.patient_id, row.target_month,
                                            estimate=float(np.mean(votes))))
    return records


def predictions_to_csv(records: Sequence[PredictionRecord], task: Task) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if task is Task.DX:
        writer.writerow(["patient_id", "target_month", *PROB_COLUMNS])
        for r in records:
            writer.writerow([r.patient_id, repr(r.target_month),
                             *[repr(p) for p in r.probs]])
    else:
        writer.writerow(["patient_id", "target_month", "yhat"])
        for r in records:
            writer.writerow([r.patient_id, repr(r.target_month),
                             repr(r.estimate)])
    return out.getvalue()


def predictions_from_csv(text: str | Iterable[str], task: Task
                         ) -> list[PredictionRecord]:
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)
    header = next(reader, None)
    if task is Task.DX:
        expected = ["patient_id", "target_month", *PROB_COLUMNS]
    else:
        expected = ["patient_id", "target_month", "yhat"]
    if header != expected:
        raise ParseError(f"prediction file header must be {expected}")
    records = []
    for row in reader:
        if not row:
            continue
        if task is Task.DX:
            records.append(PredictionRecord(
                row[0], float(row[1]),
                probs=(float(row[2]), float(row[3]), float(row[4]))))
        else:
            records.append(PredictionRecord(row[0], float(row[1]),
                                            estimate=float(row[2])))
    return records
