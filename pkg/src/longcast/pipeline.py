"""Stage orchestration: transform, fit/evaluate, forecast.

Everything here is pure in-memory plumbing over the core modules, so the
service endpoints and any direct library use share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .cohort import Cohort, Task
from .errors import ConfigError, MetricUndefinedError
from .forecast import build_test_table, forecast_table
from .metrics import MetricReport, argmax_classes, bca, mae, mauc
from .predictors import (PredictionRecord, PredictorConfig, fit_predict,
                         predictions_to_csv)
from .splits import patient_disjoint_folds, validation_rows
from .tables import FeatureTable, TableSchema, build_training_table

DEFAULT_FOLDS = 5


@dataclass
class TransformResult:
    train: FeatureTable
    test: Optional[FeatureTable] = None
    validation: Optional[FeatureTable] = None


def transform(cohort: Cohort, task: Task, *, augment: bool = True,
              vent_scale: float = 1.0, with_test: bool = True,
              with_validation: bool = True,
              per_target_cutoff: bool = True, jobs: int = 1) -> TransformResult:
    """Build the per-task tables: D1 training (augmented), D2 test rows,
    and D1 half-history validation rows."""
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    schema = TableSchema(task=task, feature_names=cohort.schema,
                         vent_scale=vent_scale)
    train = build_training_table(cohort, task, membership="D1",
                                 schema=schema, augment=augment, jobs=jobs)
    test = None
    if with_test:
        test = build_test_table(cohort, task, schema=schema,
                                per_target_cutoff=per_target_cutoff)
    validation = None
    if with_validation:
        rows = []
        for patient in cohort.select("D1"):
            rows.extend(validation_rows(patient, task, schema))
        rows.sort(key=lambda r: (r.patient_id, r.cutoff_month, r.target_month))
        validation = FeatureTable(schema=schema, rows=rows)
    return TransformResult(train=train, test=test, validation=validation)


def evaluate_predictions(task: Task, rows, records: Sequence[PredictionRecord]
                         ) -> dict[str, float]:
    """Metric values for prediction records against the rows' targets."""
    paired = [(row.target, rec) for row, rec in zip(rows, records)
              if row.target is not None]
    if not paired:
        raise MetricUndefinedError("no ground-truth targets to evaluate")
    if task is Task.DX:
        labels = [int(t) for t, _ in paired]
        probs = [list(rec.probs) for _, rec in paired]
        return {"MAUC": mauc(labels, probs),
                "BCA": bca(labels, argmax_classes(probs))}
    truth = [t for t, _ in paired]
    estimates = [rec.estimate for _, rec in paired]
    return {"MAE": mae(truth, estimates)}


@dataclass
class FitEvalResult:
    reports: list[MetricReport]
    predictions_by_seed: dict[int, str] = field(default_factory=dict)

    def reports_payload(self) -> dict:
        return {"reports": [r.to_dict() for r in self.reports]}


def _seeded_config(config: PredictorConfig, seed: int,
                   seed_scope: str) -> PredictorConfig:
    if seed_scope not in ("folds", "predictor", "both"):
        raise ConfigError(f"unknown seed scope {seed_scope!r}")
    if config.kind != "bridge" or seed_scope == "folds":
        return config
    hparams = dict(config.hyperparameters)
    hparams.setdefault("seed", seed)
    return PredictorConfig(kind=config.kind, task=config.task,
                           hyperparameters=hparams)


def fit_eval_holdout(train: FeatureTable, test: FeatureTable,
                     config: PredictorConfig, seeds: Sequence[int],
                     model_name: str = "", seed_scope: str = "both"
                     ) -> FitEvalResult:
    """Train on the full training table, evaluate once per seed on the
    held-out test table."""
    train.check_compatible(test)
    per_metric: dict[str, list[float]] = {}
    predictions = {}
    for seed in seeds:
        records = fit_predict(train, test, _seeded_config(config, seed,
                                                          seed_scope))
        predictions[seed] = predictions_to_csv(records, config.task)
        for name, value in evaluate_predictions(config.task, test.rows,
                                                records).items():
            per_metric.setdefault(name, []).append(value)
    task = config.task.value
    model = model_name or config.kind
    reports = [MetricReport.from_values(task, name, model, values,
                                        mode="holdout", n_test=len(test.rows),
                                        seeds=list(seeds))
               for name, values in per_metric.items()]
    return FitEvalResult(reports=reports, predictions_by_seed=predictions)


def fit_eval_cv(train: FeatureTable, validation: FeatureTable,
                config: PredictorConfig, seeds: Sequence[int],
                folds: Optional[dict[str, int]] = None,
                k: int = DEFAULT_FOLDS, model_name: str = "",
                seed_scope: str = "both", jobs: int = 1) -> FitEvalResult:
    """Patient-disjoint cross-validation with half-history validation rows.

    Per seed, each fold's patients are scored by a model fit on every
    other patient's training rows; the pooled validation predictions give
    one metric value per seed. A preassigned fold map pins the partition
    across seeds (the seed then only reaches the predictor). Folds are
    independent, so jobs > 1 runs them concurrently; pooling keeps fold
    order, so the output is schedule-independent.
    """
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    train.check_compatible(validation)
    per_metric: dict[str, list[float]] = {}
    predictions = {}
    for seed in seeds:
        if folds is not None:
            assignment = folds
        else:
            fold_seed = 0 if seed_scope == "predictor" else seed
            assignment = patient_disjoint_folds(
                train, k=k, seed=fold_seed,
                stratified=config.task is Task.DX)
        seeded = _seeded_config(config, seed, seed_scope)

        def run_fold(fold):
            fold_train = FeatureTable(
                schema=train.schema,
                rows=[r for r in train.rows
                      if assignment.get(r.patient_id) != fold])
            fold_val_rows = [r for r in validation.rows
                             if assignment.get(r.patient_id) == fold]
            if not fold_val_rows:
                return [], []
            fold_val = FeatureTable(schema=validation.schema,
                                    rows=fold_val_rows)
            return fold_val_rows, fit_predict(fold_train, fold_val, seeded)

        fold_ids = sorted(set(assignment.values()))
        if jobs > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(run_fold, fold_ids))
        else:
            results = [run_fold(f) for f in fold_ids]

        pooled_rows = []
        pooled_records: list[PredictionRecord] = []
        for fold_val_rows, records in results:
            pooled_rows.extend(fold_val_rows)
            pooled_records.extend(records)
        predictions[seed] = predictions_to_csv(pooled_records, config.task)
        for name, value in evaluate_predictions(config.task, pooled_rows,
                                                pooled_records).items():
            per_metric.setdefault(name, []).append(value)
    task = config.task.value
    model = model_name or config.kind
    reports = [MetricReport.from_values(task, name, model, values, mode="cv",
                                        n_validation=len(validation.rows),
                                        seeds=list(seeds))
               for name, values in per_metric.items()]
    return FitEvalResult(reports=reports, predictions_by_seed=predictions)


def forecast_predictions(cohort: Cohort, train: FeatureTable,
                         config: PredictorConfig,
                         horizons: Sequence[float]) -> tuple[FeatureTable,
                                                             list[PredictionRecord]]:
    """Horizon-grid forecast rows for D2 patients plus their predictions."""
    grid = forecast_table(cohort, config.task, horizons=horizons,
                          schema=train.schema)
    records = fit_predict(train, grid, config)
    return grid, records
