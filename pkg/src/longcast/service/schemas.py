"""Pydantic request/response models for the pipeline service.

Tables and cohorts travel as CSV text plus JSON manifests, so clients
stay free of this package's internals.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

TaskName = Literal["DX", "ADAS", "VENT"]


class ErrorBody(BaseModel):
    error_class: Literal["parse", "schema", "config", "bridge", "metric",
                         "internal"]
    message: str


class SynthRequest(BaseModel):
    patients: int = 10
    visits: int = 4
    max_visits: Optional[int] = None
    seed: int = 0
    missingness: float = 0.0
    d2_fraction: float = 0.5


class SynthResponse(BaseModel):
    cohort_csv: str
    patients: int


class TransformRequest(BaseModel):
    cohort_csv: str
    task: TaskName
    augment: bool = True
    vent_scale: float = 1.0
    with_test: bool = True
    with_validation: bool = True
    per_target_cutoff: bool = True
    strict: bool = False
    column_map: dict[str, str] = Field(default_factory=dict)
    sentinels: Optional[list[str]] = None
    jobs: int = 1


class TableBlob(BaseModel):
    csv: str
    manifest: dict
    row_count: int


class TransformResponse(BaseModel):
    train: TableBlob
    test: Optional[TableBlob] = None
    validation: Optional[TableBlob] = None


class SplitRequest(BaseModel):
    table_csv: str
    task: TaskName
    k: int = 5
    seed: int = 0
    stratified: bool = False


class SplitResponse(BaseModel):
    folds_csv: str
    fold_sizes: dict[int, int]


class PredictorSpec(BaseModel):
    kind: Literal["constant-median", "carry-forward", "knn", "bridge"]
    hyperparameters: dict = Field(default_factory=dict)
    name: str = ""


class FitEvalRequest(BaseModel):
    mode: Literal["holdout", "cv"]
    task: TaskName
    train_csv: str
    test_csv: Optional[str] = None          # holdout mode
    validation_csv: Optional[str] = None    # cv mode
    folds_csv: Optional[str] = None         # cv mode, optional pinning
    k: int = 5
    predictor: PredictorSpec
    seeds: list[int] = Field(default_factory=lambda: [0])
    seed_scope: Literal["folds", "predictor", "both"] = "both"
    jobs: int = 1


class ReportModel(BaseModel):
    task: str
    metric: str
    model: str
    per_seed: list[float]
    mean: float
    std: float
    extra: dict = Field(default_factory=dict)
    comparison: Optional[dict] = None


class FitEvalResponse(BaseModel):
    reports: list[ReportModel]
    predictions_by_seed: dict[int, str]


class ForecastRequest(BaseModel):
    cohort_csv: str
    task: TaskName
    train_csv: str
    predictor: PredictorSpec
    horizons: list[float] = Field(default_factory=list)
    vent_scale: float = 1.0
    strict: bool = False
    column_map: dict[str, str] = Field(default_factory=dict)
    sentinels: Optional[list[str]] = None


class ForecastResponse(BaseModel):
    forecast_csv: str
    row_count: int


class CompareRequest(BaseModel):
    a: dict                                 # report payload or {"reports": [...]}
    b: dict
    metric: Optional[str] = None
    alternative: Literal["one-sided", "two-sided"] = "one-sided"


class CompareResponse(BaseModel):
    report: ReportModel
    rendered: str
