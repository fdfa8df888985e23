"""FastAPI service wrapping the pipeline.

Endpoints are stateless: every request carries its data (CSV text) and
returns the derived artifacts, so the CLI and remote clients behave
identically. Domain errors map to HTTP 422 with a structured error_class
that clients translate into exit codes.
"""

from __future__ import annotations

import csv
import io
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..cohort import Cohort, ColumnMap, Task, dump_cohort, parse_cohort
from ..errors import ConfigError, LongcastError, MetricUndefinedError
from ..forecast import DEFAULT_HORIZON_GRID
from ..metrics import MetricReport, compare_reports
from ..pipeline import (fit_eval_cv, fit_eval_holdout, forecast_predictions,
                        transform)
from ..predictors import PROB_COLUMNS, PredictorConfig
from ..splits import folds_from_csv, folds_to_csv, patient_disjoint_folds
from ..synth import synth_cohort
from ..tables import FeatureTable, table_from_csv, table_manifest, table_to_csv
from . import schemas

logger = logging.getLogger(__name__)

app = FastAPI(title="longcast", version=__version__)


@app.exception_handler(LongcastError)
async def longcast_error_handler(request: Request, exc: LongcastError):
    status = 500 if exc.error_class == "internal" else 422
    return JSONResponse(
        status_code=status,
        content={"error_class": exc.error_class, "message": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"ok": True, "version": __version__}


def _parse(req) -> Cohort:
    mapping = ColumnMap().with_overrides(req.column_map)
    return parse_cohort(req.cohort_csv, mapping, sentinels=req.sentinels,
                        strict=req.strict)


def _blob(table: FeatureTable) -> schemas.TableBlob:
    return schemas.TableBlob(csv=table_to_csv(table),
                             manifest=table_manifest(table),
                             row_count=len(table.rows))


@app.post("/v1/synth", response_model=schemas.SynthResponse)
def synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
    cohort = synth_cohort(patients=req.patients, visits=req.visits,
                          max_visits=req.max_visits, seed=req.seed,
                          missingness=req.missingness,
                          d2_fraction=req.d2_fraction)
    return schemas.SynthResponse(cohort_csv=dump_cohort(cohort),
                                 patients=len(cohort))


@app.post("/v1/transform", response_model=schemas.TransformResponse)
def transform_endpoint(req: schemas.TransformRequest
                       ) -> schemas.TransformResponse:
    cohort = _parse(req)
    result = transform(cohort, Task.parse(req.task), augment=req.augment,
                       vent_scale=req.vent_scale, with_test=req.with_test,
                       with_validation=req.with_validation,
                       per_target_cutoff=req.per_target_cutoff,
                       jobs=req.jobs)
    return schemas.TransformResponse(
        train=_blob(result.train),
        test=None if result.test is None else _blob(result.test),
        validation=(None if result.validation is None
                    else _blob(result.validation)))


@app.post("/v1/split", response_model=schemas.SplitResponse)
def split(req: schemas.SplitRequest) -> schemas.SplitResponse:
    table = table_from_csv(req.table_csv, task=Task.parse(req.task))
    assignment = patient_disjoint_folds(table, k=req.k, seed=req.seed,
                                        stratified=req.stratified)
    sizes: dict[int, int] = {}
    for fold in assignment.values():
        sizes[fold] = sizes.get(fold, 0) + 1
    return schemas.SplitResponse(folds_csv=folds_to_csv(assignment),
                                 fold_sizes=dict(sorted(sizes.items())))


def _predictor_config(spec: schemas.PredictorSpec, task: Task
                      ) -> PredictorConfig:
    return PredictorConfig(kind=spec.kind, task=task,
                           hyperparameters=dict(spec.hyperparameters))


@app.post("/v1/fit-eval", response_model=schemas.FitEvalResponse)
def fit_eval(req: schemas.FitEvalRequest) -> schemas.FitEvalResponse:
    task = Task.parse(req.task)
    train = table_from_csv(req.train_csv, task=task)
    config = _predictor_config(req.predictor, task)
    name = req.predictor.name or req.predictor.kind
    if req.mode == "holdout":
        if req.test_csv is None:
            raise ConfigError("holdout mode requires test_csv")
        test = table_from_csv(req.test_csv, task=task)
        result = fit_eval_holdout(train, test, config, req.seeds,
                                  model_name=name, seed_scope=req.seed_scope)
    else:
        if req.validation_csv is None:
            raise ConfigError("cv mode requires validation_csv")
        validation = table_from_csv(req.validation_csv, task=task)
        folds = (folds_from_csv(req.folds_csv)
                 if req.folds_csv is not None else None)
        result = fit_eval_cv(train, validation, config, req.seeds,
                             folds=folds, k=req.k, model_name=name,
                             seed_scope=req.seed_scope, jobs=req.jobs)
    return schemas.FitEvalResponse(
        reports=[schemas.ReportModel(**r.to_dict()) for r in result.reports],
        predictions_by_seed=result.predictions_by_seed)


@app.post("/v1/forecast", response_model=schemas.ForecastResponse)
def forecast(req: schemas.ForecastRequest) -> schemas.ForecastResponse:
    cohort = _parse(req)
    task = Task.parse(req.task)
    train = table_from_csv(req.train_csv, task=task)
    config = _predictor_config(req.predictor, task)
    horizons = req.horizons or list(DEFAULT_HORIZON_GRID)
    grid, records = forecast_predictions(cohort, train, config, horizons)

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if task is Task.DX:
        writer.writerow(["patient_id", "horizon_month", *PROB_COLUMNS])
        for row, rec in zip(grid.rows, records):
            writer.writerow([row.patient_id, repr(row.features["horizon"]),
                             *[repr(p) for p in rec.probs]])
    else:
        writer.writerow(["patient_id", "horizon_month", "yhat"])
        for row, rec in zip(grid.rows, records):
            writer.writerow([row.patient_id, repr(row.features["horizon"]),
                             repr(rec.estimate)])
    return schemas.ForecastResponse(forecast_csv=out.getvalue(),
                                    row_count=len(grid.rows))


def _pick_report(payload: dict, metric: str | None) -> MetricReport:
    reports = payload.get("reports") if isinstance(payload, dict) else None
    if reports is None:
        return MetricReport.from_dict(payload)
    if metric is not None:
        matches = [r for r in reports if r["metric"].upper() == metric.upper()]
        if not matches:
            raise MetricUndefinedError(f"no report for metric {metric!r}")
        return MetricReport.from_dict(matches[0])
    if len(reports) != 1:
        raise ConfigError("report file holds several metrics; pass one "
                          "explicitly")
    return MetricReport.from_dict(reports[0])


@app.post("/v1/compare", response_model=schemas.CompareResponse)
def compare(req: schemas.CompareRequest) -> schemas.CompareResponse:
    report_a = _pick_report(req.a, req.metric)
    report_b = _pick_report(req.b, req.metric)
    result = compare_reports(report_a, report_b, alternative=req.alternative)
    return schemas.CompareResponse(
        report=schemas.ReportModel(**result.to_dict()),
        rendered=result.render_text())
